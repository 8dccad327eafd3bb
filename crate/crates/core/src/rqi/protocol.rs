//! Multi-scale aligned-crop inference and held-out evaluation.

use rayon::prelude::*;

use crate::distortion::DistortedSequence;
use crate::error::{Error, Result};
use crate::image::{crop, crop_rects, downscale_half, to_luma, CropRect, ImageBuffer, ImagePlane};
use crate::rng::derive_seed_index;
use crate::stats::srcc;

use super::model::{normalize, RqiModel};

/// Pairs closer than this many quality points are left out of sign accuracy.
pub const SIGN_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceProtocol {
    pub scales: usize,
    pub crops_per_scale: usize,
    pub crop_size: usize,
    pub seed: u64,
}

impl Default for InferenceProtocol {
    fn default() -> Self {
        Self { scales: 3, crops_per_scale: 20, crop_size: 64, seed: 0 }
    }
}

impl InferenceProtocol {
    pub fn single_scale(self) -> Self {
        Self { scales: 1, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.crops_per_scale == 0 || self.crop_size == 0 {
            return Err(Error::Invalid("scales, crops and crop size must all be positive".into()));
        }
        Ok(())
    }

    /// Crop plan for a `width x height` image: `(level, rect)` in level
    /// coordinates. Level `l` is the image after `l` 2x2 box downscales;
    /// levels smaller than the crop are skipped and each kept level draws
    /// its own rects from `(seed, level)`.
    pub fn plan(&self, width: usize, height: usize) -> Result<Vec<(usize, CropRect)>> {
        self.validate()?;
        let mut out = Vec::new();
        let (mut w, mut h) = (width, height);
        for level in 0..self.scales {
            if level > 0 {
                w /= 2;
                h /= 2;
            }
            if w.min(h) < self.crop_size {
                continue;
            }
            let rects = crop_rects(w, h, self.crop_size, self.crops_per_scale, derive_seed_index(self.seed, level as u64))?;
            out.extend(rects.into_iter().map(|r| (level, r)));
        }
        if out.is_empty() {
            return Err(Error::Protocol(format!(
                "no pyramid level of a {width}x{height} image admits a {} px crop",
                self.crop_size
            )));
        }
        Ok(out)
    }

    /// Number of pyramid levels actually used for a `width x height` image.
    pub fn levels_used(&self, width: usize, height: usize) -> Result<usize> {
        let plan = self.plan(width, height)?;
        let mut levels: Vec<usize> = plan.iter().map(|p| p.0).collect();
        levels.dedup();
        Ok(levels.len())
    }
}

/// Per-crop tower features of one image under a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct CropFeatures {
    pub width: usize,
    pub height: usize,
    pub features: Vec<Vec<f64>>,
}

/// Extracts features at every planned crop of `img`.
pub fn crop_features(model: &RqiModel, img: &ImageBuffer, protocol: &InferenceProtocol) -> Result<CropFeatures> {
    let plan = protocol.plan(img.width(), img.height())?;
    let mut level: ImagePlane = to_luma(img);
    let mut at = 0;
    let mut features = Vec::with_capacity(plan.len());
    for &(l, rect) in &plan {
        while at < l {
            level = downscale_half(&level)?;
            at += 1;
        }
        features.push(model.features(&normalize(&crop(&level, rect)?), protocol.crop_size)?);
    }
    Ok(CropFeatures { width: img.width(), height: img.height(), features })
}

/// Mean crop score from precomputed features; identical to [`rqi_score`].
pub fn score_from_features(model: &RqiModel, target: &CropFeatures, reference: &CropFeatures) -> Result<f64> {
    if target.width != reference.width || target.height != reference.height || target.features.len() != reference.features.len() {
        return Err(Error::dim("target and reference features come from different plans"));
    }
    let total: f64 = target.features.iter().zip(&reference.features).map(|(a, b)| model.score_features(a, b)).sum();
    Ok(total / target.features.len() as f64)
}

/// Relative quality of `target` against `reference`: the mean model output
/// over aligned crops at every usable pyramid level. Positive means the
/// target is judged better.
pub fn rqi_score(model: &RqiModel, target: &ImageBuffer, reference: &ImageBuffer, protocol: &InferenceProtocol) -> Result<f64> {
    if target.width() != reference.width() || target.height() != reference.height() {
        return Err(Error::dim(format!(
            "target {}x{} vs reference {}x{}",
            target.width(),
            target.height(),
            reference.width(),
            reference.height()
        )));
    }
    let ft = crop_features(model, target, protocol)?;
    let fr = crop_features(model, reference, protocol)?;
    score_from_features(model, &ft, &fr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Fraction of ordered pairs with `|Δq| ≥ 5` whose score sign matches.
    pub sign_accuracy: f64,
    pub sign_pairs: usize,
    /// Per content: SRCC of `rqi_score(variant, pristine)` against the variant labels.
    pub content_srcc: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn mean_srcc(&self) -> f64 {
        self.content_srcc.iter().map(|c| c.1).sum::<f64>() / self.content_srcc.len().max(1) as f64
    }
}

struct SequenceScores {
    content_id: String,
    hits: usize,
    pairs: usize,
    srcc: Option<f64>,
}

fn score_sequence(model: &RqiModel, seq: &DistortedSequence, protocol: &InferenceProtocol) -> Result<SequenceScores> {
    let images = seq.images();
    let feats = images.iter().map(|i| crop_features(model, i.image, protocol)).collect::<Result<Vec<_>>>()?;
    let (mut hits, mut pairs) = (0, 0);
    for a in 0..images.len() {
        for b in 0..images.len() {
            let dq = images[a].quality - images[b].quality;
            if a == b || dq.abs() < SIGN_MARGIN {
                continue;
            }
            let s = score_from_features(model, &feats[a], &feats[b])?;
            pairs += 1;
            if s != 0.0 && (s > 0.0) == (dq > 0.0) {
                hits += 1;
            }
        }
    }
    let vs_ref = (1..images.len()).map(|k| score_from_features(model, &feats[k], &feats[0])).collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = images[1..].iter().map(|i| i.quality).collect();
    let srcc = match srcc(&vs_ref, &labels) {
        Ok(v) => Some(v),
        Err(Error::DegenerateInput(_)) | Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SequenceScores { content_id: seq.content_id.clone(), hits, pairs, srcc })
}

/// Sign accuracy and per-content SRCC on held-out sequences. Contents whose
/// scores are all equal get SRCC 0.
pub fn evaluate(model: &RqiModel, sequences: &[DistortedSequence], protocol: &InferenceProtocol) -> Result<EvalReport> {
    if sequences.is_empty() {
        return Err(Error::EmptyInput("no held-out sequences".into()));
    }
    let per: Vec<SequenceScores> = sequences.par_iter().map(|s| score_sequence(model, s, protocol)).collect::<Result<_>>()?;
    let hits: usize = per.iter().map(|s| s.hits).sum();
    let pairs: usize = per.iter().map(|s| s.pairs).sum();
    Ok(EvalReport {
        sign_accuracy: if pairs == 0 { 0.0 } else { hits as f64 / pairs as f64 },
        sign_pairs: pairs,
        content_srcc: per.into_iter().map(|s| (s.content_id, s.srcc.unwrap_or(0.0))).collect(),
    })
}

pub fn evaluate_sign_accuracy(model: &RqiModel, sequences: &[DistortedSequence], protocol: &InferenceProtocol) -> Result<f64> {
    Ok(evaluate(model, sequences, protocol)?.sign_accuracy)
}
