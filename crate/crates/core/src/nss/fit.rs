//! Moment-matching fits of (asymmetric) generalized Gaussian distributions.
//!
//! Both fits search the shape grid `α ∈ {0.2, 0.201, …, 10}` for the value
//! whose theoretical ratio `r(α) = Γ(1/α)Γ(3/α) / Γ(2/α)²` is closest to the
//! sample ratio `E[x²] / E[|x|]²` (for the asymmetric fit the sample ratio is
//! first corrected for the left/right scale imbalance).

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const ALPHA_MIN: f64 = 0.2;
pub const ALPHA_MAX: f64 = 10.0;
pub const ALPHA_STEP: f64 = 0.001;
pub const MIN_SAMPLES: usize = 100;

struct ShapeTable {
    alphas: Vec<f64>,
    /// r(α), strictly decreasing in α
    ratios: Vec<f64>,
}

fn table() -> &'static ShapeTable {
    static TABLE: OnceLock<ShapeTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize + 1;
        let alphas: Vec<f64> = (0..n).map(|i| ALPHA_MIN + i as f64 * ALPHA_STEP).collect();
        let ratios = alphas.iter().map(|&a| shape_ratio(a)).collect();
        ShapeTable { alphas, ratios }
    })
}

/// `Γ(1/α)Γ(3/α) / Γ(2/α)²`.
pub fn shape_ratio(alpha: f64) -> f64 {
    (ln_gamma(1.0 / alpha) + ln_gamma(3.0 / alpha) - 2.0 * ln_gamma(2.0 / alpha)).exp()
}

/// Grid value of α minimizing `|r(α) - target|`; ties resolve to the smaller α.
fn match_shape(target: f64) -> f64 {
    let t = table();
    // ratios are decreasing, so flip the comparison for partition_point
    let idx = t.ratios.partition_point(|&r| r > target);
    let best = match idx {
        0 => 0,
        i if i >= t.ratios.len() => t.ratios.len() - 1,
        i => {
            if (t.ratios[i - 1] - target).abs() <= (t.ratios[i] - target).abs() {
                i - 1
            } else {
                i
            }
        }
    };
    t.alphas[best]
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples; distribution fits need at least {MIN_SAMPLES}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite sample".into()));
    }
    let first = samples[0];
    if samples.iter().all(|&v| v == first) {
        return Err(Error::DegenerateInput("all samples are equal".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    pub alpha: f64,
    pub sigma: f64,
}

/// Zero-mean generalized Gaussian fit; `sigma` is the root mean square.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let second = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let abs_mean = samples.iter().map(|v| v.abs()).sum::<f64>() / n;
    if second == 0.0 || abs_mean == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok(GgdFit { alpha: match_shape(second / (abs_mean * abs_mean)), sigma: second.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub mean_offset: f64,
}

/// Asymmetric generalized Gaussian fit with separate left/right scales.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    check_samples(samples)?;
    let (mut left_sq, mut left_n, mut right_sq, mut right_n) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for &v in samples {
        if v < 0.0 {
            left_sq += v * v;
            left_n += 1;
        } else if v > 0.0 {
            right_sq += v * v;
            right_n += 1;
        }
        abs_sum += v.abs();
        sq_sum += v * v;
    }
    if left_n == 0 || right_n == 0 {
        return Err(Error::DegenerateInput("samples do not straddle zero".into()));
    }
    let sigma_left = (left_sq / left_n as f64).sqrt();
    let sigma_right = (right_sq / right_n as f64).sqrt();
    let n = samples.len() as f64;
    let gamma_hat = sigma_left / sigma_right;
    let r_hat = (abs_sum / n).powi(2) / (sq_sum / n);
    let big_r = r_hat * (gamma_hat.powi(3) + 1.0) * (gamma_hat + 1.0) / (gamma_hat * gamma_hat + 1.0).powi(2);
    let alpha = match_shape(1.0 / big_r);
    let g1 = ln_gamma(1.0 / alpha);
    let g2 = ln_gamma(2.0 / alpha);
    let g3 = ln_gamma(3.0 / alpha);
    let scale = (g1 - g3).exp().sqrt();
    let mean_offset = (sigma_right - sigma_left) * scale * (g2 - g1).exp();
    Ok(AggdFit { alpha, sigma_left, sigma_right, mean_offset })
}
