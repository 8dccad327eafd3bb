//! Study persistence. Each study lives in `<root>/<study_id>/` as
//! `manifest.json`, `assignments.jsonl` (issued pairs) and `choices.jsonl`
//! (answered [`ComparisonRecord`]s, one per line). The logs are append-only
//! and replaying them rebuilds every counter and lease.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Result, StudyError};
use crate::model::{Assignment, ChoiceSubmission, ComparisonRecord, StudyManifest};
use crate::study::{Ack, Study};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

const MANIFEST: &str = "manifest.json";
const ASSIGNMENTS: &str = "assignments.jsonl";
const CHOICES: &str = "choices.jsonl";

pub struct StudyStore {
    root: PathBuf,
    clock: Arc<dyn Clock>,
    studies: BTreeMap<String, Study>,
}

fn append_line<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    // one write per record so a line is never interleaved with another
    f.write_all(&line)?;
    f.flush()?;
    Ok(())
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Rebuilds a study from its directory.
pub fn replay(dir: &Path) -> Result<Study> {
    let manifest: StudyManifest = serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST))?))?;
    let mut study = Study::new(manifest);
    for a in read_lines::<Assignment>(&dir.join(ASSIGNMENTS))? {
        study.apply_assignment(a)?;
    }
    for r in read_lines::<ComparisonRecord>(&dir.join(CHOICES))? {
        study.apply_choice(r)?;
    }
    Ok(study)
}

impl StudyStore {
    /// Opens `root`, replaying every study found there.
    pub fn open(root: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut studies = BTreeMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if dir.join(MANIFEST).is_file() {
                let s = replay(&dir)?;
                studies.insert(s.id().to_string(), s);
            }
        }
        Ok(Self { root, clock, studies })
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn get(&self, id: &str) -> Result<&Study> {
        self.studies.get(id).ok_or_else(|| StudyError::UnknownStudy(id.to_string()))
    }

    fn get_mut(&mut self, id: &str) -> Result<&mut Study> {
        self.studies.get_mut(id).ok_or_else(|| StudyError::UnknownStudy(id.to_string()))
    }

    pub fn create(&mut self, manifest: StudyManifest) -> Result<&Study> {
        manifest.validate()?;
        let id = manifest.study_id.clone();
        if self.studies.contains_key(&id) || self.dir(&id).exists() {
            return Err(StudyError::Conflict(id));
        }
        let dir = self.dir(&id);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        self.studies.insert(id.clone(), Study::new(manifest));
        Ok(&self.studies[&id])
    }

    pub fn next_pair(&mut self, id: &str, rater: &str) -> Result<Option<Assignment>> {
        let now = self.now();
        let path = self.dir(id).join(ASSIGNMENTS);
        let study = self.get_mut(id)?;
        let a = study.next_pair(rater, now);
        if let Some(a) = &a {
            append_line(&path, a)?;
        }
        Ok(a)
    }

    pub fn record_choice(&mut self, id: &str, sub: &ChoiceSubmission) -> Result<Ack> {
        let now = self.now();
        let path = self.dir(id).join(CHOICES);
        let study = self.get_mut(id)?;
        match study.check_choice(sub, now)? {
            None => Ok(Ack { record_id: sub.record_id.clone(), duplicate: true }),
            Some(record) => {
                append_line(&path, &record)?;
                study.apply_choice(record)?;
                Ok(Ack { record_id: sub.record_id.clone(), duplicate: false })
            }
        }
    }

    pub fn study_dir(&self, id: &str) -> Result<PathBuf> {
        self.get(id)?;
        Ok(self.dir(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContentSpec, CropPolicy, ItemSpec, Side};
    use std::sync::atomic::{AtomicU64, Ordering};

    struct FakeClock(AtomicU64);

    impl Clock for FakeClock {
        fn now_ms(&self) -> u64 {
            self.0.fetch_add(1, Ordering::SeqCst)
        }
    }

    fn manifest(dir: &Path) -> StudyManifest {
        let img = dir.join("x.png");
        fs::write(&img, b"not checked here").unwrap();
        StudyManifest {
            study_id: "s".into(),
            contents: ["c1", "c2"]
                .iter()
                .map(|c| ContentSpec {
                    content_id: c.to_string(),
                    items: ["a", "b", "c"].iter().map(|i| ItemSpec { item_id: i.to_string(), path: img.clone() }).collect(),
                })
                .collect(),
            min_raters_per_pair: 2,
            crop_policy: CropPolicy::Full,
            seed: 11,
            lease_ms: 600_000,
        }
    }

    #[test]
    fn replay_reconstructs_state() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("data");
        let clock = Arc::new(FakeClock(AtomicU64::new(1_000)));
        let mut store = StudyStore::open(&root, clock.clone()).unwrap();
        store.create(manifest(tmp.path())).unwrap();
        for step in 0..9 {
            let rater = format!("r{}", step % 3);
            let a = store.next_pair("s", &rater).unwrap().unwrap();
            if step % 4 != 3 {
                let side = if step % 2 == 0 { Side::Left } else { Side::Right };
                store.record_choice("s", &ChoiceSubmission { record_id: a.record_id, rater_id: rater, chosen: side }).unwrap();
            }
        }
        let reopened = StudyStore::open(&root, clock.clone()).unwrap();
        let now = clock.now_ms();
        assert_eq!(reopened.get("s").unwrap().status(now), store.get("s").unwrap().status(now));
        assert_eq!(reopened.get("s").unwrap().export(), store.get("s").unwrap().export());
        // the next assignment after restart is the one the original would make
        let mut a = store;
        let mut b = reopened;
        assert_eq!(a.next_pair("s", "r9").unwrap().map(|x| x.record_id), b.next_pair("s", "r9").unwrap().map(|x| x.record_id));
    }

    #[test]
    fn create_conflict_and_unknown() {
        let tmp = tempfile::tempdir().unwrap();
        let mut store = StudyStore::open(tmp.path().join("d"), Arc::new(SystemClock)).unwrap();
        store.create(manifest(tmp.path())).unwrap();
        assert!(matches!(store.create(manifest(tmp.path())), Err(StudyError::Conflict(_))));
        assert!(matches!(store.next_pair("zz", "r"), Err(StudyError::UnknownStudy(_))));
    }
}
