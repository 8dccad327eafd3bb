//! In-memory state of one study. Every mutation is a pure function of the
//! current state, the clock reading passed in, and the manifest seed, so
//! replaying the logs rebuilds the same state.

use std::collections::{BTreeMap, HashMap, HashSet};

use rqi_core::rng::{derive_seed, derive_seed_index, SplitMix64};
use rqi_core::stats::CountMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};
use crate::model::{Assignment, ChoiceSubmission, ComparisonRecord, StudyManifest};

/// Unordered pair `(i, j)`, `i < j`, of items within content `content`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub content: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone)]
struct Lease {
    assignment: Assignment,
    pair: PairKey,
    /// Ordinal of this issue among all issues of the same pair.
    issue: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextPair {
    Assigned {
        record_id: String,
        content_id: String,
        left_url: String,
        right_url: String,
        assignment_seed: u64,
    },
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatus {
    pub content_id: String,
    pub item_a: String,
    pub item_b: String,
    pub coverage: u32,
    pub in_flight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyStatus {
    pub study_id: String,
    pub min_raters_per_pair: u32,
    pub pairs: Vec<PairStatus>,
    pub answered: usize,
    /// Fraction of pairs with coverage ≥ `min_raters_per_pair`.
    pub completion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentCounts {
    pub content_id: String,
    pub items: Vec<String>,
    /// `wins[i][j]`: times item i was chosen over item j.
    pub wins: Vec<Vec<u64>>,
}

impl ContentCounts {
    pub fn count_matrix(&self) -> rqi_core::Result<CountMatrix> {
        CountMatrix::new(self.items.clone(), self.wins.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyExport {
    pub study_id: String,
    pub contents: Vec<ContentCounts>,
}

/// Outcome of a submitted choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub record_id: String,
    /// True when the record had already been answered; nothing changed.
    pub duplicate: bool,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub manifest: StudyManifest,
    pairs: Vec<PairKey>,
    pair_index: HashMap<PairKey, usize>,
    coverage: Vec<u32>,
    issues: Vec<u64>,
    leases: HashMap<String, Lease>,
    answered: HashMap<String, ComparisonRecord>,
    /// Pairs each rater has ever been issued.
    rater_seen: HashMap<String, HashSet<usize>>,
    issued: u64,
}

impl Study {
    pub fn new(manifest: StudyManifest) -> Self {
        let mut pairs = Vec::new();
        for (c, content) in manifest.contents.iter().enumerate() {
            let n = content.items.len();
            for i in 0..n {
                for j in i + 1..n {
                    pairs.push(PairKey { content: c, i, j });
                }
            }
        }
        let pair_index = pairs.iter().enumerate().map(|(k, p)| (*p, k)).collect();
        let n = pairs.len();
        Self {
            manifest,
            pairs,
            pair_index,
            coverage: vec![0; n],
            issues: vec![0; n],
            leases: HashMap::new(),
            answered: HashMap::new(),
            rater_seen: HashMap::new(),
            issued: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.manifest.study_id
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    fn item(&self, content: usize, idx: usize) -> &str {
        &self.manifest.contents[content].items[idx].item_id
    }

    fn locate(&self, content_id: &str, a: &str, b: &str) -> Option<usize> {
        let c = self.manifest.contents.iter().position(|x| x.content_id == content_id)?;
        let items = &self.manifest.contents[c].items;
        let ia = items.iter().position(|x| x.item_id == a)?;
        let ib = items.iter().position(|x| x.item_id == b)?;
        self.pair_index.get(&PairKey { content: c, i: ia.min(ib), j: ia.max(ib) }).copied()
    }

    fn live(&self, lease: &Lease, now: u64) -> bool {
        now < lease.assignment.issued_at.saturating_add(self.manifest.lease_ms)
    }

    fn in_flight(&self, now: u64) -> Vec<u32> {
        let mut v = vec![0; self.pairs.len()];
        for l in self.leases.values() {
            if self.live(l, now) {
                v[self.pair_index[&l.pair]] += 1;
            }
        }
        v
    }

    pub fn is_complete(&self) -> bool {
        self.coverage.iter().all(|&c| c >= self.manifest.min_raters_per_pair)
    }

    /// Picks a pair for `rater` among those with the least coverage plus
    /// live leases, skipping pairs the rater was already issued (answered,
    /// held, or abandoned).
    /// Returns `None` when the study is complete or nothing is left for them.
    pub fn next_pair(&mut self, rater: &str, now: u64) -> Option<Assignment> {
        if self.is_complete() {
            return None;
        }
        let flight = self.in_flight(now);
        let seen = self.rater_seen.get(rater);
        let eligible: Vec<usize> = (0..self.pairs.len()).filter(|k| seen.map_or(true, |s| !s.contains(k))).collect();
        let min = eligible.iter().map(|&k| self.coverage[k] + flight[k]).min()?;
        let tied: Vec<usize> = eligible.into_iter().filter(|&k| self.coverage[k] + flight[k] == min).collect();

        let seed = derive_seed_index(self.manifest.seed, self.issued);
        let k = tied[SplitMix64::new(seed).below(tied.len() as u64) as usize];
        let pair = self.pairs[k];
        let (a, b) = (self.item(pair.content, pair.i).to_string(), self.item(pair.content, pair.j).to_string());
        let (left, right) = if placement_coin(seed) { (a, b) } else { (b, a) };
        let assignment = Assignment {
            record_id: format!("{}-{:08}", self.manifest.study_id, self.issued),
            study_id: self.manifest.study_id.clone(),
            rater_id: rater.to_string(),
            content_id: self.manifest.contents[pair.content].content_id.clone(),
            left_item: left,
            right_item: right,
            assignment_seed: seed,
            issued_at: now,
        };
        self.apply_assignment(assignment.clone()).expect("freshly built assignment is consistent");
        Some(assignment)
    }

    /// Registers an issued assignment (also used when replaying the log).
    pub fn apply_assignment(&mut self, a: Assignment) -> Result<()> {
        let k = self
            .locate(&a.content_id, &a.left_item, &a.right_item)
            .ok_or_else(|| StudyError::Validation(format!("assignment `{}` names unknown items", a.record_id)))?;
        self.issues[k] += 1;
        self.issued += 1;
        self.rater_seen.entry(a.rater_id.clone()).or_default().insert(k);
        self.leases.insert(a.record_id.clone(), Lease { pair: self.pairs[k], issue: self.issues[k], assignment: a });
        Ok(())
    }

    /// Validates a submission and builds its log record. `Ok(None)` means the
    /// record was already answered.
    pub fn check_choice(&self, sub: &ChoiceSubmission, now: u64) -> Result<Option<ComparisonRecord>> {
        if self.answered.contains_key(&sub.record_id) {
            return Ok(None);
        }
        let lease = self.leases.get(&sub.record_id).ok_or_else(|| StudyError::UnknownRecord(sub.record_id.clone()))?;
        if lease.assignment.rater_id != sub.rater_id {
            return Err(StudyError::Validation(format!(
                "record `{}` was issued to another rater",
                sub.record_id
            )));
        }
        let k = self.pair_index[&lease.pair];
        if !self.live(lease, now) && self.issues[k] > lease.issue {
            return Err(StudyError::StaleRecord(sub.record_id.clone()));
        }
        let a = &lease.assignment;
        Ok(Some(ComparisonRecord {
            record_id: a.record_id.clone(),
            study_id: a.study_id.clone(),
            rater_id: a.rater_id.clone(),
            content_id: a.content_id.clone(),
            left_item: a.left_item.clone(),
            right_item: a.right_item.clone(),
            chosen: sub.chosen,
            assignment_seed: a.assignment_seed,
            issued_at: a.issued_at,
            answered_at: now,
        }))
    }

    /// Applies an answered record (also used when replaying the log).
    /// Returns false for a record id already applied.
    pub fn apply_choice(&mut self, r: ComparisonRecord) -> Result<bool> {
        if self.answered.contains_key(&r.record_id) {
            return Ok(false);
        }
        let k = self
            .locate(&r.content_id, &r.left_item, &r.right_item)
            .ok_or_else(|| StudyError::Validation(format!("record `{}` names unknown items", r.record_id)))?;
        self.leases.remove(&r.record_id);
        self.coverage[k] += 1;
        self.rater_seen.entry(r.rater_id.clone()).or_default().insert(k);
        self.answered.insert(r.record_id.clone(), r);
        Ok(true)
    }

    pub fn status(&self, now: u64) -> StudyStatus {
        let flight = self.in_flight(now);
        let min = self.manifest.min_raters_per_pair;
        let pairs: Vec<PairStatus> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(k, p)| PairStatus {
                content_id: self.manifest.contents[p.content].content_id.clone(),
                item_a: self.item(p.content, p.i).to_string(),
                item_b: self.item(p.content, p.j).to_string(),
                coverage: self.coverage[k],
                in_flight: flight[k],
            })
            .collect();
        let done = self.coverage.iter().filter(|&&c| c >= min).count();
        StudyStatus {
            study_id: self.manifest.study_id.clone(),
            min_raters_per_pair: min,
            answered: self.answered.len(),
            completion: done as f64 / self.pairs.len().max(1) as f64,
            pairs,
        }
    }

    /// Win counts from answered records only.
    pub fn export(&self) -> StudyExport {
        let mut contents: Vec<ContentCounts> = self
            .manifest
            .contents
            .iter()
            .map(|c| ContentCounts {
                content_id: c.content_id.clone(),
                items: c.items.iter().map(|i| i.item_id.clone()).collect(),
                wins: vec![vec![0; c.items.len()]; c.items.len()],
            })
            .collect();
        let by_id: BTreeMap<&str, usize> =
            self.manifest.contents.iter().enumerate().map(|(i, c)| (c.content_id.as_str(), i)).collect();
        for r in self.answered.values() {
            let c = &mut contents[by_id[r.content_id.as_str()]];
            let w = c.items.iter().position(|x| x == r.winner()).unwrap();
            let l = c.items.iter().position(|x| x == r.loser()).unwrap();
            c.wins[w][l] += 1;
        }
        StudyExport { study_id: self.manifest.study_id.clone(), contents }
    }

    pub fn coverage_of(&self, content_id: &str, a: &str, b: &str) -> Option<u32> {
        self.locate(content_id, a, b).map(|k| self.coverage[k])
    }
}

/// Left/right placement depends on the assignment seed alone.
pub fn placement_coin(assignment_seed: u64) -> bool {
    SplitMix64::new(derive_seed(assignment_seed, "placement")).coin()
}
