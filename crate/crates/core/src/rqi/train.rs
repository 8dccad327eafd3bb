//! Adam training on content-grouped crop batches.
//!
//! Every batch holds pairs from a single content and cuts one aligned crop
//! (pyramid level, rectangle, optional mirror) shared by all of its images,
//! so each image passes through the tower once per batch. Batch order,
//! crops and the train/validation split all derive from the config seed;
//! updates run sequentially, so a seed fixes the trained weights.

use std::collections::BTreeSet;

use crate::distortion::DistortedSequence;
use crate::error::{Error, Result};
use crate::image::{crop_rects, downscale_half, to_luma, CropRect, ImageBuffer};
use crate::rng::{derive_seed, derive_seed_index, SplitMix64};

use super::model::{CropBatch, CropPair, HeadMode, RqiModel};
use super::nn::Architecture;
use super::pairs::{build_pairs, quality_range, PairSample};

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub crop_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Pyramid levels training crops are drawn from.
    pub scales: usize,
    /// Mirror each batch's crops with probability 1/2.
    pub flip: bool,
    /// Fixed crops per validation content.
    pub validation_crops: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            crop_size: 64,
            batch_size: 32,
            epochs: 6,
            learning_rate: 1e-3,
            validation_fraction: 0.2,
            scales: 3,
            flip: true,
            validation_crops: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Invalid(format!("validation fraction {} must be in (0, 1)", self.validation_fraction)));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.scales == 0 || self.validation_crops == 0 {
            return Err(Error::Invalid("batch size, epochs, scales and validation crops must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub model: RqiModel,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub train_contents: Vec<String>,
    pub val_contents: Vec<String>,
}

/// Splits distinct content ids into `(train, validation)`; validation gets
/// `round(fraction · n)` contents, at least one, and never all of them.
pub fn split_contents(ids: &[String], fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let unique: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.len() < 2 {
        return Err(Error::InsufficientData("a train/validation split needs at least 2 contents".into()));
    }
    let n_val = ((fraction * unique.len() as f64).round() as usize).clamp(1, unique.len() - 1);
    let mut order = unique;
    SplitMix64::new(derive_seed(seed, "split")).shuffle(&mut order);
    let val = order.split_off(order.len() - n_val);
    order.sort();
    let mut val = val;
    val.sort();
    Ok((order, val))
}

/// Normalized luma pyramid stored in single precision.
struct Pyramid {
    levels: Vec<(usize, usize, Vec<f32>)>,
}

impl Pyramid {
    fn new(img: &ImageBuffer, scales: usize, crop: usize) -> Result<Self> {
        let mut plane = to_luma(img);
        let mut levels = Vec::new();
        for l in 0..scales {
            if l > 0 {
                if plane.width() < 2 || plane.height() < 2 {
                    break;
                }
                plane = downscale_half(&plane)?;
            }
            if plane.width().min(plane.height()) < crop {
                break;
            }
            levels.push((plane.width(), plane.height(), plane.data().iter().map(|v| (v / 255.0) as f32).collect()));
        }
        if levels.is_empty() {
            return Err(Error::dim(format!("{}x{} image is smaller than the {crop} px crop", img.width(), img.height())));
        }
        Ok(Self { levels })
    }

    fn crop(&self, level: usize, r: CropRect, mirror: bool) -> Vec<f64> {
        let (w, _, data) = &self.levels[level];
        let mut out = Vec::with_capacity(r.w * r.h);
        for y in r.y..r.y + r.h {
            let row = &data[y * w + r.x..y * w + r.x + r.w];
            if mirror {
                out.extend(row.iter().rev().map(|&v| v as f64));
            } else {
                out.extend(row.iter().map(|&v| v as f64));
            }
        }
        out
    }
}

/// Builds the batch for `pairs` (all from one sequence) at one crop placement.
fn assemble(pyramids: &[Pyramid], pairs: &[&PairSample], level: usize, rect: CropRect, mirror: bool) -> CropBatch {
    let mut slot = vec![usize::MAX; pyramids.len()];
    let mut crops = Vec::new();
    let mut out = Vec::with_capacity(pairs.len());
    let mut index = |k: usize, crops: &mut Vec<Vec<f64>>| {
        if slot[k] == usize::MAX {
            slot[k] = crops.len();
            crops.push(pyramids[k].crop(level, rect, mirror));
        }
        slot[k]
    };
    for p in pairs {
        let a = index(p.a, &mut crops);
        let b = index(p.b, &mut crops);
        out.push(CropPair { a, b, label: p.label });
    }
    CropBatch { side: rect.w, crops, pairs: out }
}

fn random_placement(pyr: &Pyramid, crop: usize, rng: &mut SplitMix64, flip: bool) -> Result<(usize, CropRect, bool)> {
    let level = rng.below(pyr.levels.len() as u64) as usize;
    let (w, h, _) = pyr.levels[level];
    let rect = crop_rects(w, h, crop, 1, rng.next_u64())?[0];
    let mirror = flip && rng.coin();
    Ok((level, rect, mirror))
}

/// Trains `model` on `pairs` (indices into `sequences`). The model's label
/// range must be the one the pair labels were normalized with.
pub fn train(mut model: RqiModel, sequences: &[DistortedSequence], pairs: &[PairSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no training pairs".into()));
    }
    if config.crop_size % model.arch().stride() != 0 {
        return Err(Error::Shape(format!("crop size {} is not a multiple of {}", config.crop_size, model.arch().stride())));
    }
    let ids: Vec<String> = pairs.iter().map(|p| p.content_id.clone()).collect();
    let (train_ids, val_ids) = split_contents(&ids, config.validation_fraction, config.seed)?;

    let used: BTreeSet<usize> = pairs.iter().map(|p| p.sequence).collect();
    let mut pyramids: Vec<Option<Vec<Pyramid>>> = (0..sequences.len()).map(|_| None).collect();
    for &s in &used {
        let seq = sequences.get(s).ok_or_else(|| Error::Invalid(format!("pair references sequence {s}")))?;
        let pyr = seq.images().iter().map(|i| Pyramid::new(i.image, config.scales, config.crop_size)).collect::<Result<Vec<_>>>()?;
        pyramids[s] = Some(pyr);
    }

    // pairs grouped per sequence, split by content
    let mut train_groups: Vec<(usize, Vec<&PairSample>)> = Vec::new();
    let mut val_groups: Vec<(usize, Vec<&PairSample>)> = Vec::new();
    for &s in &used {
        let group: Vec<&PairSample> = pairs.iter().filter(|p| p.sequence == s).collect();
        if val_ids.contains(&group[0].content_id) {
            val_groups.push((s, group));
        } else {
            train_groups.push((s, group));
        }
    }

    // fixed validation placements
    let val_seed = derive_seed(config.seed, "validation");
    let mut val_batches = Vec::new();
    for (s, group) in &val_groups {
        let pyr = pyramids[*s].as_ref().unwrap();
        for k in 0..config.validation_crops {
            let level = k % pyr[0].levels.len();
            let (w, h, _) = pyr[0].levels[level];
            let rect = crop_rects(w, h, config.crop_size, 1, derive_seed_index(val_seed, (*s * 1000 + k) as u64))?[0];
            val_batches.push(assemble(pyr, group, level, rect, false));
        }
    }
    let validation_loss = |m: &RqiModel| -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for b in &val_batches {
            total += m.loss(b)? * b.pairs.len() as f64;
            n += b.pairs.len();
        }
        Ok(total / n as f64)
    };

    let mut adam = Adam::new(model.params().len(), config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let epoch_seed = derive_seed(config.seed, "epochs");
    for epoch in 1..=config.epochs {
        let mut rng = SplitMix64::new(derive_seed_index(epoch_seed, epoch as u64));
        let mut batches: Vec<(usize, Vec<&PairSample>)> = Vec::new();
        for (s, group) in &train_groups {
            let mut g = group.clone();
            rng.shuffle(&mut g);
            for chunk in g.chunks(config.batch_size) {
                batches.push((*s, chunk.to_vec()));
            }
        }
        rng.shuffle(&mut batches);
        let (mut total, mut count) = (0.0, 0usize);
        for (bi, (s, chunk)) in batches.iter().enumerate() {
            let pyr = pyramids[*s].as_ref().unwrap();
            let (level, rect, mirror) = random_placement(&pyr[0], config.crop_size, &mut rng, config.flip)?;
            let batch = assemble(pyr, chunk, level, rect, mirror);
            let (loss, grad) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            adam.step(model.params_mut(), &grad);
            total += loss * chunk.len() as f64;
            count += chunk.len();
        }
        let val_loss = validation_loss(&model)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: batches.len() });
        }
        history.push(EpochStats { epoch, steps: batches.len(), train_loss: total / count.max(1) as f64, val_loss });
        if best.as_ref().map_or(true, |b| val_loss < b.0) {
            best = Some((val_loss, epoch, model.params().to_vec()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.set_params(&params);
    Ok(TrainOutcome { model, best_epoch, history, train_contents: train_ids, val_contents: val_ids })
}

/// Builds pairs under `mode`, initializes a default-architecture model from
/// `config.seed`, and trains it.
pub fn train_mode(sequences: &[DistortedSequence], mode: &str, head: HeadMode, config: &TrainConfig) -> Result<TrainOutcome> {
    let pairs = build_pairs(sequences, mode)?;
    let model = RqiModel::new(Architecture::default(), head, quality_range(sequences)?, config.seed)?;
    train(model, sequences, &pairs, config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientProbe {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientProbe {
    /// `|a - n| / max(|a|, |n|)`, zero when both vanish.
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

/// Compares the analytic loss gradient with central differences of step
/// `eps` at `count` distinct weights chosen from `seed`.
pub fn gradient_check(model: &RqiModel, batch: &CropBatch, eps: f64, count: usize, seed: u64) -> Result<Vec<GradientProbe>> {
    let (_, grad) = model.loss_and_grad(batch)?;
    let n = model.params().len();
    let mut rng = SplitMix64::new(seed);
    let mut picked = BTreeSet::new();
    while picked.len() < count.min(n) {
        picked.insert(rng.below(n as u64) as usize);
    }
    let mut probe = model.clone();
    picked
        .into_iter()
        .map(|k| {
            let orig = probe.params()[k];
            probe.params_mut()[k] = orig + eps;
            let up = probe.loss(batch)?;
            probe.params_mut()[k] = orig - eps;
            let down = probe.loss(batch)?;
            probe.params_mut()[k] = orig;
            Ok(GradientProbe { index: k, analytic: grad[k], numeric: (up - down) / (2.0 * eps) })
        })
        .collect()
}

/// A batch of random crops from `sequences` for gradient checks and benchmarks.
pub fn sample_batch(sequences: &[DistortedSequence], mode: &str, crop: usize, pairs: usize, seed: u64) -> Result<CropBatch> {
    let all = build_pairs(sequences, mode)?;
    let mut rng = SplitMix64::new(seed);
    let s = rng.below(sequences.len() as u64) as usize;
    let mut mine: Vec<&PairSample> = all.iter().filter(|p| p.sequence == s).collect();
    rng.shuffle(&mut mine);
    mine.truncate(pairs);
    let pyr = sequences[s].images().iter().map(|i| Pyramid::new(i.image, 1, crop)).collect::<Result<Vec<_>>>()?;
    let (level, rect, mirror) = random_placement(&pyr[0], crop, &mut rng, false)?;
    Ok(assemble(&pyr, &mine, level, rect, mirror))
}
