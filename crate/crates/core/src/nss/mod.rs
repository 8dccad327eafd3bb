//! NIQE-style no-reference quality from natural scene statistics.
//!
//! Images are reduced to mean-subtracted contrast-normalized (MSCN)
//! coefficients, tiled, and each tile is summarized by 36 distribution-fit
//! features (18 at native scale, 18 after one 2x2 box downscale). A
//! multivariate Gaussian fitted to sharp tiles of a pristine corpus is the
//! reference; an image scores by the Mahalanobis-style distance between that
//! model and the Gaussian fitted to its own tiles. Lower is better.

mod fit;
mod niqe;

pub use fit::{fit_aggd, fit_ggd, shape_ratio, AggdFit, GgdFit, ALPHA_MAX, ALPHA_MIN};
pub use niqe::{
    fit_pristine_model, niqe_features, niqe_score, read_model, write_model, PristineModel,
    DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_QUANTILE, FEATURE_DIM,
};

use crate::error::Result;
use crate::image::{gaussian_filter, ImagePlane};

pub const MSCN_SIGMA: f64 = 7.0 / 6.0;
pub const MSCN_RADIUS: usize = 3;

/// `(I - μ) / (σ + 1)` with Gaussian-weighted local mean and deviation.
pub fn mscn(p: &ImagePlane) -> Result<ImagePlane> {
    Ok(mscn_parts(p)?.0)
}

/// MSCN coefficients together with the local deviation map.
pub(crate) fn mscn_parts(p: &ImagePlane) -> Result<(ImagePlane, ImagePlane)> {
    let mu = gaussian_filter(p, MSCN_SIGMA, MSCN_RADIUS)?;
    let sq = gaussian_filter(&p.map(|v| v * v), MSCN_SIGMA, MSCN_RADIUS)?;
    let sigma = sq.zip_map(&mu, |s, m| (s - m * m).abs().sqrt())?;
    let centered = p.zip_map(&mu, |v, m| v - m)?;
    let out = centered.zip_map(&sigma, |c, s| c / (s + 1.0))?;
    Ok((out, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn constant_plane_gives_zero_mscn() {
        let p = ImagePlane::filled(20, 20, 77.0).unwrap();
        assert!(mscn(&p).unwrap().data().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn gaussian_noise_mscn_variance_near_one() {
        for seed in 0..20 {
            let mut rng = SplitMix64::new(seed);
            let p = ImagePlane::new(64, 64, (0..64 * 64).map(|_| 128.0 + 20.0 * rng.normal()).collect()).unwrap();
            let m = mscn(&p).unwrap();
            let mean = m.mean();
            let var = m.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m.data().len() as f64;
            assert!((0.5..=1.5).contains(&var), "seed {seed}: var {var}");
        }
    }

    #[test]
    fn mscn_rejects_tiny_planes() {
        let p = ImagePlane::filled(3, 10, 1.0).unwrap();
        assert!(mscn(&p).is_err());
    }
}
