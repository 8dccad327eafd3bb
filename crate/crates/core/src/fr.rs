//! Full-reference distortion metrics: PSNR and SSIM on luminance planes.

use crate::error::{Error, Result};
use crate::image::{gaussian_filter, ImagePlane};

/// 10·log10(peak² / MSE). Identical inputs return `f64::INFINITY`.
pub fn psnr(a: &ImagePlane, b: &ImagePlane, peak: f64) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::dim(format!(
            "psnr on {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::Invalid(format!("psnr peak must be positive, got {peak}")));
    }
    let mse = mse(a, b);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

pub(crate) fn mse(a: &ImagePlane, b: &ImagePlane) -> f64 {
    let sse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    sse / a.data().len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub window_sigma: f64,
    pub window_radius: usize,
}

impl Default for SsimParams {
    /// The original reference configuration: 11x11 Gaussian window, σ = 1.5.
    fn default() -> Self {
        Self { k1: 0.01, k2: 0.03, dynamic_range: 255.0, window_sigma: 1.5, window_radius: 5 }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct SsimResult {
    pub mean: f64,
    pub map: ImagePlane,
}

/// Gaussian-windowed SSIM. The map is not border-cropped; the window uses
/// symmetric reflection at the edges.
pub fn ssim(a: &ImagePlane, b: &ImagePlane, params: &SsimParams) -> Result<SsimResult> {
    if !a.same_dims(b) {
        return Err(Error::dim(format!(
            "ssim on {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if !(params.k1 > 0.0 && params.k2 > 0.0) || params.window_radius == 0 {
        return Err(Error::Invalid("ssim needs k1, k2 > 0 and radius >= 1".into()));
    }
    let win = 2 * params.window_radius + 1;
    if a.width() < win || a.height() < win {
        return Err(Error::dim(format!("{}x{} smaller than the {win}x{win} window", a.width(), a.height())));
    }
    let blur = |p: &ImagePlane| gaussian_filter(p, params.window_sigma, params.window_radius);
    let mu_a = blur(a)?;
    let mu_b = blur(b)?;
    let aa = blur(&a.zip_map(a, |x, y| x * y)?)?;
    let bb = blur(&b.zip_map(b, |x, y| x * y)?)?;
    let ab = blur(&a.zip_map(b, |x, y| x * y)?)?;
    let (c1, c2) = (params.c1(), params.c2());

    let n = a.data().len();
    let mut map = Vec::with_capacity(n);
    for i in 0..n {
        let (ma, mb) = (mu_a.data()[i], mu_b.data()[i]);
        let var_a = aa.data()[i] - ma * ma;
        let var_b = bb.data()[i] - mb * mb;
        let cov = ab.data()[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        map.push(num / den);
    }
    let mean = map.iter().sum::<f64>() / n as f64;
    Ok(SsimResult { mean, map: ImagePlane::new(a.width(), a.height(), map)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn noise_plane(w: usize, h: usize, seed: u64) -> ImagePlane {
        let mut rng = SplitMix64::new(seed);
        ImagePlane::new(w, h, (0..w * h).map(|_| (rng.next_f64() * 255.0).floor()).collect()).unwrap()
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = noise_plane(8, 8, 1);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_closed_form_offsets() {
        let a = ImagePlane::filled(16, 16, 100.0).unwrap();
        let shifted = a.map(|v| v + 16.0);
        // MSE = 256 -> 10 log10(65025 / 256)
        let expected = 10.0 * (65025.0f64 / 256.0).log10();
        assert!((expected - 24.048).abs() < 5e-4);
        assert!((psnr(&a, &shifted, 255.0).unwrap() - expected).abs() < 1e-12);
        let alt = ImagePlane::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 116.0 } else { 84.0 }).unwrap();
        assert!((psnr(&a, &alt, 255.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        let a = ImagePlane::filled(4, 4, 0.0).unwrap();
        let b = ImagePlane::filled(4, 5, 0.0).unwrap();
        assert!(matches!(psnr(&a, &b, 255.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = noise_plane(32, 24, 3);
        let r = ssim(&a, &a, &SsimParams::default()).unwrap();
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn ssim_constant_planes_closed_form() {
        let a = ImagePlane::filled(20, 20, 100.0).unwrap();
        let b = ImagePlane::filled(20, 20, 120.0).unwrap();
        let p = SsimParams::default();
        let c1 = p.c1();
        let expected = (2.0 * 100.0 * 120.0 + c1) / (100.0f64.powi(2) + 120.0f64.powi(2) + c1);
        let got = ssim(&a, &b, &p).unwrap().mean;
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert!((got - 0.98361).abs() < 1e-5);
    }

    #[test]
    fn ssim_inverted_image_scores_low() {
        let a = noise_plane(48, 48, 9);
        let inv = a.map(|v| 255.0 - v);
        assert!(ssim(&a, &inv, &SsimParams::default()).unwrap().mean < 0.1);
    }

    #[test]
    fn ssim_too_small_for_window() {
        let a = ImagePlane::filled(10, 30, 1.0).unwrap();
        assert!(matches!(ssim(&a, &a, &SsimParams::default()), Err(Error::Dimension(_))));
    }

    #[test]
    fn metrics_are_symmetric() {
        let a = noise_plane(33, 29, 4);
        let b = noise_plane(33, 29, 5);
        let p = SsimParams::default();
        assert_eq!(ssim(&a, &b, &p).unwrap().mean, ssim(&b, &a, &p).unwrap().mean);
        assert_eq!(psnr(&a, &b, 255.0).unwrap(), psnr(&b, &a, 255.0).unwrap());
    }

    #[test]
    fn ssim_perturbations_never_exceed_identity() {
        // Hill-climb style probe: no single-pixel perturbation of b = a beats 1.
        let a = noise_plane(24, 24, 12);
        let p = SsimParams::default();
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let idx = rng.below(24 * 24) as usize;
            let delta = if rng.coin() { 1.0 } else { -1.0 } * (1.0 + rng.below(20) as f64);
            let mut data = a.data().to_vec();
            data[idx] += delta;
            let b = ImagePlane::new(24, 24, data).unwrap();
            assert!(ssim(&a, &b, &p).unwrap().mean < 1.0);
        }
    }
}
