//! The pairwise scorer, its training loss, and the model file format.
//!
//! Model file layout (little-endian): magic `RQI1`, `u32` format version,
//! `u8` mode (0 = antisymmetrized, 1 = raw), `f64` label range, `u32`
//! descriptor length followed by the architecture descriptor as `u32`s,
//! then every parameter as `f64` in [`nn`](super::nn) layer order.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::ImagePlane;

use super::nn::{init_params, Architecture, Network, TowerCache};

const MAGIC: &[u8; 4] = b"RQI1";
const FORMAT_VERSION: u32 = 1;

/// How the head output is turned into the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadMode {
    /// `(h(A,B) - h(B,A)) / 2`; swapping the inputs negates the score exactly.
    #[default]
    Antisymmetric,
    /// `h(A,B)` as is.
    Raw,
}

impl HeadMode {
    fn byte(self) -> u8 {
        match self {
            HeadMode::Antisymmetric => 0,
            HeadMode::Raw => 1,
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadMode::Antisymmetric => "antisymmetrized",
            HeadMode::Raw => "raw",
        })
    }
}

impl FromStr for HeadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "antisymmetrized" | "antisymmetric" => Ok(HeadMode::Antisymmetric),
            "raw" => Ok(HeadMode::Raw),
            other => Err(Error::Unknown { kind: "head mode", name: other.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RqiModel {
    arch: Architecture,
    params: Vec<f64>,
    pub mode: HeadMode,
    /// Quality range the training labels were divided by.
    pub label_range: f64,
    /// Initialization seed; not stored in the model file.
    pub seed: u64,
}

/// One training example inside a [`CropBatch`]: indices into its crops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropPair {
    pub a: usize,
    pub b: usize,
    pub label: f64,
}

/// Normalized square crops plus the pairs that use them; each distinct crop
/// runs through the tower once however many pairs reference it.
#[derive(Debug, Clone, Default)]
pub struct CropBatch {
    pub side: usize,
    pub crops: Vec<Vec<f64>>,
    pub pairs: Vec<CropPair>,
}

impl RqiModel {
    pub fn new(arch: Architecture, mode: HeadMode, label_range: f64, seed: u64) -> Result<Self> {
        arch.validate().map_err(Error::Shape)?;
        let params = init_params(&arch, seed);
        Self::from_parts(arch, params, mode, label_range, seed)
    }

    pub fn from_parts(arch: Architecture, params: Vec<f64>, mode: HeadMode, label_range: f64, seed: u64) -> Result<Self> {
        arch.validate().map_err(Error::Shape)?;
        if params.len() != arch.param_count() {
            return Err(Error::Shape(format!("{} parameters for an architecture of {}", params.len(), arch.param_count())));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite model weight".into()));
        }
        if !(label_range > 0.0 && label_range.is_finite()) {
            return Err(Error::Invalid(format!("label range {label_range} must be positive")));
        }
        Ok(Self { arch, params, mode, label_range, seed })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    fn net(&self) -> Network<'_> {
        Network::new(&self.arch, &self.params)
    }

    fn check_crop(&self, len: usize, side: usize) -> Result<()> {
        if side == 0 || side % self.arch.stride() != 0 {
            return Err(Error::Shape(format!("crop side {side} is not a multiple of {}", self.arch.stride())));
        }
        if len != side * side {
            return Err(Error::Shape(format!("crop has {len} samples, expected {side}x{side}")));
        }
        Ok(())
    }

    /// Pooled tower features of a normalized `side x side` crop.
    pub fn features(&self, crop: &[f64], side: usize) -> Result<Vec<f64>> {
        self.check_crop(crop.len(), side)?;
        Ok(self.net().features(crop, side))
    }

    /// Score from two feature vectors.
    pub fn score_features(&self, fa: &[f64], fb: &[f64]) -> f64 {
        let net = self.net();
        let h_ab = net.head_forward(&Network::head_input(fa, fb)).0;
        match self.mode {
            HeadMode::Raw => h_ab,
            HeadMode::Antisymmetric => {
                let h_ba = net.head_forward(&Network::head_input(fb, fa)).0;
                (h_ab - h_ba) / 2.0
            }
        }
    }

    /// Score of crop `a` relative to crop `b`, both in 0..=255 sample units.
    /// Positive means `a` looks better.
    pub fn forward(&self, a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
        if a.width() != a.height() || !a.same_dims(b) {
            return Err(Error::Shape(format!(
                "crops must be equal squares, got {}x{} and {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            )));
        }
        let side = a.width();
        let fa = self.features(&normalize(a), side)?;
        let fb = self.features(&normalize(b), side)?;
        Ok(self.score_features(&fa, &fb))
    }

    /// Mean squared error over the batch and its gradient w.r.t. every parameter.
    pub fn loss_and_grad(&self, batch: &CropBatch) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(batch, Some(&mut grad))?;
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &CropBatch) -> Result<f64> {
        self.accumulate(batch, None)
    }

    fn accumulate(&self, batch: &CropBatch, mut grad: Option<&mut Vec<f64>>) -> Result<f64> {
        if batch.pairs.is_empty() {
            return Err(Error::EmptyInput("batch has no pairs".into()));
        }
        let net = self.net();
        let side = batch.side;
        let mut used = vec![false; batch.crops.len()];
        for p in &batch.pairs {
            if p.a >= batch.crops.len() || p.b >= batch.crops.len() {
                return Err(Error::Invalid("pair references a missing crop".into()));
            }
            used[p.a] = true;
            used[p.b] = true;
        }
        let mut feats: Vec<Option<(Vec<f64>, TowerCache)>> = Vec::with_capacity(batch.crops.len());
        for (crop, &u) in batch.crops.iter().zip(&used) {
            if u {
                self.check_crop(crop.len(), side)?;
                feats.push(Some(net.tower_forward(crop, side)));
            } else {
                feats.push(None);
            }
        }
        let f = self.arch.feature_dim();
        let mut d_feats = vec![vec![0.0; f]; batch.crops.len()];
        let scale = 1.0 / batch.pairs.len() as f64;
        let mut loss = 0.0;
        for p in &batch.pairs {
            let fa = &feats[p.a].as_ref().unwrap().0;
            let fb = &feats[p.b].as_ref().unwrap().0;
            let (h_ab, acts_ab) = net.head_forward(&Network::head_input(fa, fb));
            let (out, acts_ba) = match self.mode {
                HeadMode::Raw => (h_ab, None),
                HeadMode::Antisymmetric => {
                    let (h_ba, acts) = net.head_forward(&Network::head_input(fb, fa));
                    ((h_ab - h_ba) / 2.0, Some(acts))
                }
            };
            let r = out - p.label;
            loss += r * r * scale;
            let Some(g) = grad.as_deref_mut() else { continue };
            let d_out = 2.0 * r * scale;
            let w_ab = if acts_ba.is_some() { 0.5 } else { 1.0 };
            let du = net.head_backward(&acts_ab, d_out * w_ab, g);
            // u = [x, y, x - y] with (x, y) = (fa, fb)
            for k in 0..f {
                d_feats[p.a][k] += du[k] + du[2 * f + k];
                d_feats[p.b][k] += du[f + k] - du[2 * f + k];
            }
            if let Some(acts) = acts_ba {
                let du = net.head_backward(&acts, -d_out * 0.5, g);
                for k in 0..f {
                    d_feats[p.b][k] += du[k] + du[2 * f + k];
                    d_feats[p.a][k] += du[f + k] - du[2 * f + k];
                }
            }
        }
        if let Some(g) = grad {
            for (cached, d) in feats.iter().zip(&d_feats) {
                if let Some((_, cache)) = cached {
                    if d.iter().any(|&v| v != 0.0) {
                        net.tower_backward(cache, d, g);
                    }
                }
            }
        }
        Ok(loss)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let desc = self.arch.descriptor();
        let mut out = Vec::with_capacity(32 + 4 * desc.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.mode.byte());
        out.extend_from_slice(&self.label_range.to_le_bytes());
        out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
        for d in desc {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an RQI1 model file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {version}")));
        }
        let mode = match r.take(1)?[0] {
            0 => HeadMode::Antisymmetric,
            1 => HeadMode::Raw,
            b => return Err(Error::Format(format!("unknown mode byte {b}"))),
        };
        let label_range = r.f64()?;
        let n = r.u32()? as usize;
        if n > 1024 {
            return Err(Error::Format("architecture descriptor too long".into()));
        }
        let desc = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let arch = Architecture::from_descriptor(&desc).ok_or_else(|| Error::Format("malformed architecture descriptor".into()))?;
        arch.validate().map_err(Error::Format)?;
        let count = arch.param_count();
        if r.remaining() != count * 8 {
            return Err(Error::Format(format!("expected {count} weights, found {} bytes", r.remaining())));
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Self::from_parts(arch, params, mode, label_range, 0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(Error::Format("model file truncated".into()));
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }
}

/// Scales 0..=255 samples to 0..=1 network input.
pub fn normalize(p: &ImagePlane) -> Vec<f64> {
    p.data().iter().map(|v| v / 255.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_plane(rng: &mut SplitMix64, side: usize) -> ImagePlane {
        ImagePlane::new(side, side, (0..side * side).map(|_| rng.next_f64() * 255.0).collect()).unwrap()
    }

    #[test]
    fn antisymmetry_is_exact() {
        let model = RqiModel::new(Architecture::default(), HeadMode::Antisymmetric, 50.0, 3).unwrap();
        let mut rng = SplitMix64::new(1);
        for _ in 0..20 {
            let a = random_plane(&mut rng, 32);
            let b = random_plane(&mut rng, 32);
            let ab = model.forward(&a, &b).unwrap();
            assert_eq!(ab, -model.forward(&b, &a).unwrap());
            assert_eq!(model.forward(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn raw_mode_is_not_forced_antisymmetric() {
        let model = RqiModel::new(Architecture::default(), HeadMode::Raw, 50.0, 3).unwrap();
        let mut rng = SplitMix64::new(2);
        let a = random_plane(&mut rng, 32);
        let b = random_plane(&mut rng, 32);
        let s = model.forward(&a, &b).unwrap() + model.forward(&b, &a).unwrap();
        assert!(s.abs() > 1e-12);
    }

    #[test]
    fn shape_errors() {
        let model = RqiModel::new(Architecture::default(), HeadMode::Antisymmetric, 50.0, 3).unwrap();
        let a = ImagePlane::filled(32, 32, 1.0).unwrap();
        let b = ImagePlane::filled(48, 48, 1.0).unwrap();
        let c = ImagePlane::filled(24, 24, 1.0).unwrap();
        assert!(matches!(model.forward(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(model.forward(&c, &c), Err(Error::Shape(_))));
    }

    #[test]
    fn file_round_trip() {
        let model = RqiModel::new(Architecture::default(), HeadMode::Raw, 61.25, 9).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"RQI1");
        assert_eq!(bytes.len(), 4 + 4 + 1 + 8 + 4 + 4 * 16 + 8 * model.params().len());
        let back = RqiModel::from_bytes(&bytes).unwrap();
        assert_eq!(back.params(), model.params());
        assert_eq!(back.mode, HeadMode::Raw);
        assert_eq!(back.label_range, 61.25);
        assert!(RqiModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(RqiModel::from_bytes(&bad), Err(Error::Format(_))));
    }

    fn small_batch(rng: &mut SplitMix64, side: usize) -> CropBatch {
        let crops: Vec<Vec<f64>> = (0..4).map(|_| (0..side * side).map(|_| rng.next_f64()).collect()).collect();
        let pairs = vec![
            CropPair { a: 0, b: 1, label: 0.4 },
            CropPair { a: 1, b: 0, label: -0.4 },
            CropPair { a: 2, b: 3, label: -0.7 },
            CropPair { a: 0, b: 3, label: 0.1 },
        ];
        CropBatch { side, crops, pairs }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for mode in [HeadMode::Antisymmetric, HeadMode::Raw] {
            let mut model = RqiModel::new(Architecture::default(), mode, 50.0, 11).unwrap();
            let mut rng = SplitMix64::new(5);
            let batch = small_batch(&mut rng, 32);
            let (_, grad) = model.loss_and_grad(&batch).unwrap();
            let n = model.params().len();
            let mut checked = 0;
            for _ in 0..40 {
                let k = rng.below(n as u64) as usize;
                let orig = model.params()[k];
                let eps = 1e-6;
                model.params_mut()[k] = orig + eps;
                let up = model.loss(&batch).unwrap();
                model.params_mut()[k] = orig - eps;
                let down = model.loss(&batch).unwrap();
                model.params_mut()[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                let scale = grad[k].abs().max(fd.abs());
                if scale > 1e-9 {
                    assert!((grad[k] - fd).abs() / scale < 1e-4, "{mode} param {k}: {} vs {fd}", grad[k]);
                    checked += 1;
                }
            }
            assert!(checked > 10);
        }
    }
}
