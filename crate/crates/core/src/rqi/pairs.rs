//! Ordered training pairs with normalized quality-discrepancy labels.

use crate::distortion::DistortedSequence;
use crate::error::{Error, Result};

/// One ordered pair from a single content. `a` and `b` index
/// [`DistortedSequence::images`] (0 is the pristine image).
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub content_id: String,
    pub sequence: usize,
    pub a: usize,
    pub b: usize,
    pub image_a: String,
    pub image_b: String,
    pub label: f64,
}

/// Chooses which ordered index pairs of a sequence become training pairs.
pub trait PairStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn pairs(&self, seq: &DistortedSequence) -> Vec<(usize, usize)>;
}

/// Every ordered pair `(i, j)`, `i != j`, over all n+1 images.
pub struct Arbitrary;

impl PairStrategy for Arbitrary {
    fn name(&self) -> &'static str {
        "arbitrary"
    }

    fn pairs(&self, seq: &DistortedSequence) -> Vec<(usize, usize)> {
        let n = seq.len();
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect()
    }
}

/// Only `(I_i, I_0)`: each variant against its pristine reference.
pub struct FrStyle;

impl PairStrategy for FrStyle {
    fn name(&self) -> &'static str {
        "fr"
    }

    fn pairs(&self, seq: &DistortedSequence) -> Vec<(usize, usize)> {
        (1..seq.len()).map(|i| (i, 0)).collect()
    }
}

/// Arbitrary pairs restricted to one distortion family; the pristine image
/// pairs with every family.
pub struct SingleDistortion;

impl PairStrategy for SingleDistortion {
    fn name(&self) -> &'static str {
        "single"
    }

    fn pairs(&self, seq: &DistortedSequence) -> Vec<(usize, usize)> {
        let fam = |k: usize| if k == 0 { None } else { Some(seq.variants[k - 1].spec.family.as_str()) };
        Arbitrary
            .pairs(seq)
            .into_iter()
            .filter(|&(i, j)| fam(i).is_none() || fam(j).is_none() || fam(i) == fam(j))
            .collect()
    }
}

pub struct PairRegistry {
    entries: Vec<Box<dyn PairStrategy>>,
}

impl Default for PairRegistry {
    fn default() -> Self {
        Self { entries: vec![Box::new(Arbitrary), Box::new(FrStyle), Box::new(SingleDistortion)] }
    }
}

impl PairRegistry {
    pub fn register(&mut self, s: Box<dyn PairStrategy>) {
        self.entries.retain(|e| e.name() != s.name());
        self.entries.push(s);
    }

    /// Looks up a strategy; `fr-style` and `single-distortion` are accepted aliases.
    pub fn get(&self, name: &str) -> Result<&dyn PairStrategy> {
        let canonical = match name {
            "fr-style" => "fr",
            "single-distortion" => "single",
            other => other,
        };
        self.entries
            .iter()
            .find(|e| e.name() == canonical)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown { kind: "pair mode", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

/// `max q - min q` over every image of every sequence.
pub fn quality_range(sequences: &[DistortedSequence]) -> Result<f64> {
    let qs = sequences.iter().flat_map(|s| s.images().into_iter().map(|i| i.quality).collect::<Vec<_>>());
    let (lo, hi) = qs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q), hi.max(q)));
    if !(hi > lo) {
        return Err(Error::DegenerateInput("all images share one quality value".into()));
    }
    Ok(hi - lo)
}

pub fn discrepancy_label(qa: f64, qb: f64, q_range: f64) -> f64 {
    ((qa - qb) / q_range).clamp(-1.0, 1.0)
}

/// Pairs for every sequence under `strategy`, labelled with a fixed `q_range`.
pub fn build_pairs_with(
    sequences: &[DistortedSequence],
    strategy: &dyn PairStrategy,
    q_range: f64,
) -> Result<Vec<PairSample>> {
    if sequences.is_empty() {
        return Err(Error::EmptyInput("no sequences to pair".into()));
    }
    let mut out = Vec::new();
    for (si, seq) in sequences.iter().enumerate() {
        let images = seq.images();
        let ids = seq.image_ids();
        for (a, b) in strategy.pairs(seq) {
            out.push(PairSample {
                content_id: seq.content_id.clone(),
                sequence: si,
                a,
                b,
                image_a: ids[a].clone(),
                image_b: ids[b].clone(),
                label: discrepancy_label(images[a].quality, images[b].quality, q_range),
            });
        }
    }
    Ok(out)
}

/// Pairs under the named mode with the dataset-wide quality range.
pub fn build_pairs(sequences: &[DistortedSequence], mode: &str) -> Result<Vec<PairSample>> {
    let registry = PairRegistry::default();
    let strategy = registry.get(mode)?;
    if sequences.is_empty() {
        return Err(Error::EmptyInput("no sequences to pair".into()));
    }
    build_pairs_with(sequences, strategy, quality_range(sequences)?)
}
