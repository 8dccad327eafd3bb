use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::fit::{fit_aggd, AggdFit};
use super::mscn_parts;
use crate::error::{Error, Result};
use crate::image::{downscale_half, CropRect, ImagePlane};

pub const FEATURE_DIM: usize = 36;
pub const DEFAULT_PATCH_SIZE: usize = 96;
pub const DEFAULT_SHARPNESS_QUANTILE: f64 = 0.75;
const MODEL_MAGIC: &[u8; 5] = b"NIQE1";
const COV_REGULARIZER: f64 = 1e-6;
const EIGEN_FLOOR: f64 = 1e-8;
pub const MIN_TILES: usize = 100;
pub const MIN_IMAGES: usize = 10;

/// Pristine multivariate Gaussian over tile features.
#[derive(Debug, Clone, PartialEq)]
pub struct PristineModel {
    pub mu: Vec<f64>,
    /// Row-major `FEATURE_DIM x FEATURE_DIM`.
    pub cov: Vec<f64>,
    pub patch_size: usize,
    pub sharpness_quantile: f64,
}

/// MSCN at native and half scale, plus the native local-deviation map.
struct Analysis {
    native: ImagePlane,
    half: ImagePlane,
    sigma: ImagePlane,
}

fn analyze(p: &ImagePlane) -> Result<Analysis> {
    let (native, sigma) = mscn_parts(p)?;
    let (half, _) = mscn_parts(&downscale_half(p)?)?;
    Ok(Analysis { native, half, sigma })
}

fn push_aggd(out: &mut Vec<f64>, fit: AggdFit) {
    out.extend([fit.alpha, fit.mean_offset, fit.sigma_left.powi(2), fit.sigma_right.powi(2)]);
}

/// 18 features of one MSCN region: the coefficient fit (shape, mean of the
/// two squared scales) and four-parameter fits of the horizontal, vertical
/// and both diagonal neighbour products.
fn region_features(m: &ImagePlane, r: CropRect, out: &mut Vec<f64>) -> Result<()> {
    let w = m.width();
    let d = m.data();
    let at = |x: usize, y: usize| d[y * w + x];
    let mut coeffs = Vec::with_capacity(r.w * r.h);
    for y in r.y..r.y + r.h {
        coeffs.extend_from_slice(&d[y * w + r.x..y * w + r.x + r.w]);
    }
    let base = fit_aggd(&coeffs)?;
    out.push(base.alpha);
    out.push((base.sigma_left.powi(2) + base.sigma_right.powi(2)) / 2.0);

    let (x0, x1, y0, y1) = (r.x, r.x + r.w, r.y, r.y + r.h);
    let mut prod = Vec::with_capacity(r.w * r.h);
    // horizontal
    for y in y0..y1 {
        prod.extend((x0..x1 - 1).map(|x| at(x, y) * at(x + 1, y)));
    }
    push_aggd(out, fit_aggd(&prod)?);
    prod.clear();
    // vertical
    for y in y0..y1 - 1 {
        prod.extend((x0..x1).map(|x| at(x, y) * at(x, y + 1)));
    }
    push_aggd(out, fit_aggd(&prod)?);
    prod.clear();
    // main diagonal
    for y in y0..y1 - 1 {
        prod.extend((x0..x1 - 1).map(|x| at(x, y) * at(x + 1, y + 1)));
    }
    push_aggd(out, fit_aggd(&prod)?);
    prod.clear();
    // anti-diagonal
    for y in y0..y1 - 1 {
        prod.extend((x0 + 1..x1).map(|x| at(x, y) * at(x - 1, y + 1)));
    }
    push_aggd(out, fit_aggd(&prod)?);
    Ok(())
}

fn tile_features(a: &Analysis, r: CropRect) -> Result<Vec<f64>> {
    let mut f = Vec::with_capacity(FEATURE_DIM);
    region_features(&a.native, r, &mut f)?;
    let half = CropRect::new(r.x / 2, r.y / 2, r.w / 2, r.h / 2);
    region_features(&a.half, half, &mut f)?;
    debug_assert_eq!(f.len(), FEATURE_DIM);
    Ok(f)
}

fn tile_grid(width: usize, height: usize, patch: usize) -> Vec<CropRect> {
    let mut out = Vec::new();
    for ty in 0..height / patch {
        for tx in 0..width / patch {
            out.push(CropRect::new(tx * patch, ty * patch, patch, patch));
        }
    }
    out
}

fn mean_over(p: &ImagePlane, r: CropRect) -> f64 {
    let mut s = 0.0;
    for y in r.y..r.y + r.h {
        s += p.data()[y * p.width() + r.x..y * p.width() + r.x + r.w].iter().sum::<f64>();
    }
    s / (r.w * r.h) as f64
}

/// Features of the whole plane treated as a single tile.
pub fn niqe_features(p: &ImagePlane) -> Result<Vec<f64>> {
    if p.width() < 16 || p.height() < 16 {
        return Err(Error::dim(format!("{}x{} too small for NIQE features", p.width(), p.height())));
    }
    let a = analyze(p)?;
    // the half-scale region must match the downscaled plane exactly
    let r = CropRect::new(0, 0, p.width() & !1, p.height() & !1);
    tile_features(&a, r)
}

fn mean_and_cov(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mu = vec![0.0; FEATURE_DIM];
    for r in rows {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; FEATURE_DIM * FEATURE_DIM];
    for r in rows {
        for i in 0..FEATURE_DIM {
            let di = r[i] - mu[i];
            for j in 0..FEATURE_DIM {
                cov[i * FEATURE_DIM + j] += di * (r[j] - mu[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n);
    (mu, cov)
}

/// Features of the horizontally mirrored tile: per scale the two diagonal
/// orientations trade places, everything else is unchanged.
fn mirror_features(f: &[f64]) -> Vec<f64> {
    let mut g = f.to_vec();
    for s in [0, FEATURE_DIM / 2] {
        for k in 0..4 {
            g.swap(s + 10 + k, s + 14 + k);
        }
    }
    g
}

/// Fits the pristine model from the sharpest tiles of a corpus.
///
/// Tile sharpness is the mean local deviation over the tile. The threshold is
/// the nearest-rank `sharpness_quantile` over all corpus tiles; tiles at or
/// above it are kept, each together with its mirrored feature vector so the
/// model favours neither diagonal. Covariance is the population covariance
/// plus `1e-6·I`.
pub fn fit_pristine_model(corpus: &[ImagePlane], patch_size: usize, sharpness_quantile: f64) -> Result<PristineModel> {
    if corpus.len() < MIN_IMAGES {
        return Err(Error::InsufficientData(format!("{} images; need at least {MIN_IMAGES}", corpus.len())));
    }
    if !(sharpness_quantile > 0.0 && sharpness_quantile < 1.0) {
        return Err(Error::Invalid(format!("sharpness quantile {sharpness_quantile} not in (0, 1)")));
    }
    if patch_size < 16 || patch_size % 2 != 0 {
        return Err(Error::Invalid(format!("patch size {patch_size} must be even and >= 16")));
    }
    let mut candidates = Vec::new();
    let analyses = corpus.iter().map(analyze).collect::<Result<Vec<_>>>()?;
    for (ai, a) in analyses.iter().enumerate() {
        for r in tile_grid(a.native.width(), a.native.height(), patch_size) {
            candidates.push((ai, r, mean_over(&a.sigma, r)));
        }
    }
    if candidates.is_empty() {
        return Err(Error::InsufficientData("corpus images are smaller than one patch".into()));
    }
    let mut sharp: Vec<f64> = candidates.iter().map(|c| c.2).collect();
    sharp.sort_by(f64::total_cmp);
    let rank = ((sharpness_quantile * sharp.len() as f64).ceil() as usize).clamp(1, sharp.len());
    let threshold = sharp[rank - 1];

    let mut rows = Vec::new();
    for &(ai, r, s) in &candidates {
        if s < threshold {
            continue;
        }
        match tile_features(&analyses[ai], r) {
            Ok(f) => rows.push(f),
            Err(Error::DegenerateInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if rows.len() < MIN_TILES {
        return Err(Error::InsufficientData(format!("{} tiles survived; need at least {MIN_TILES}", rows.len())));
    }
    let mirrored: Vec<Vec<f64>> = rows.iter().map(|f| mirror_features(f)).collect();
    rows.extend(mirrored);
    let (mu, mut cov) = mean_and_cov(&rows);
    for i in 0..FEATURE_DIM {
        cov[i * FEATURE_DIM + i] += COV_REGULARIZER;
    }
    Ok(PristineModel { mu, cov, patch_size, sharpness_quantile })
}

/// Distance between the pristine model and the image's own tile Gaussian.
///
/// `sqrt(dᵀ ((Σ₁ + Σ₂)/2)⁺ d)` where the pseudo-inverse drops eigenvalues
/// below `1e-8`. Tiles whose statistics are degenerate (flat) are skipped.
pub fn niqe_score(img: &ImagePlane, model: &PristineModel) -> Result<f64> {
    let a = analyze(img)?;
    let tiles = tile_grid(img.width(), img.height(), model.patch_size);
    if tiles.is_empty() {
        return Err(Error::dim(format!(
            "{}x{} image is smaller than one {}-pixel patch",
            img.width(),
            img.height(),
            model.patch_size
        )));
    }
    let mut rows = Vec::with_capacity(tiles.len());
    let mut last_err = None;
    for r in tiles {
        match tile_features(&a, r) {
            Ok(f) => rows.push(f),
            Err(e @ Error::DegenerateInput(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::DegenerateInput("no usable tiles".into())));
    }
    let (mu, cov) = mean_and_cov(&rows);
    let pooled = DMatrix::from_fn(FEATURE_DIM, FEATURE_DIM, |i, j| {
        (model.cov[i * FEATURE_DIM + j] + cov[i * FEATURE_DIM + j]) / 2.0
    });
    let eig = SymmetricEigen::new(pooled);
    let d = DVector::from_iterator(FEATURE_DIM, model.mu.iter().zip(&mu).map(|(a, b)| a - b));
    let proj = eig.eigenvectors.transpose() * &d;
    let dist2: f64 = proj
        .iter()
        .zip(eig.eigenvalues.iter())
        .filter(|(_, &l)| l > EIGEN_FLOOR)
        .map(|(p, l)| p * p / l)
        .sum();
    Ok(dist2.max(0.0).sqrt())
}

/// Little-endian: magic `NIQE1`, u32 patch size, f64 quantile, 36 f64 means,
/// 36x36 f64 covariance row-major.
pub fn write_model(model: &PristineModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(5 + 4 + 8 * (1 + FEATURE_DIM + FEATURE_DIM * FEATURE_DIM));
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&(model.patch_size as u32).to_le_bytes());
    buf.extend_from_slice(&model.sharpness_quantile.to_le_bytes());
    for v in model.mu.iter().chain(&model.cov) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<PristineModel> {
    let bytes = fs::read(path)?;
    let expected = 5 + 4 + 8 * (1 + FEATURE_DIM + FEATURE_DIM * FEATURE_DIM);
    if bytes.len() != expected || &bytes[..5] != MODEL_MAGIC {
        return Err(Error::Format("not a NIQE1 model file".into()));
    }
    let patch_size = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let mut vals = bytes[9..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let sharpness_quantile = vals.next().unwrap();
    let mu: Vec<f64> = vals.by_ref().take(FEATURE_DIM).collect();
    let cov: Vec<f64> = vals.collect();
    Ok(PristineModel { mu, cov, patch_size, sharpness_quantile })
}
