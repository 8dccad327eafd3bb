//! Rank/linear correlation, winning rate and Thurstone Case V scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Invalid(format!("sequence lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("correlation needs at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite value in correlation input".into()));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("correlation of a constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(x, y)
}

/// Index of the best entry; ties resolve to the lowest index.
pub fn best_index(scores: &[f64], higher_is_better: bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) if higher_is_better => s > scores[b],
            Some(b) => s < scores[b],
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Fraction of contents where the metric's best model is the users' best.
///
/// `metric_scores[c][m]` and `user_scales[c][m]` share the canonical model order.
pub fn winning_rate(metric_scores: &[Vec<f64>], user_scales: &[Vec<f64>], higher_is_better: bool) -> Result<f64> {
    if metric_scores.is_empty() {
        return Err(Error::EmptyInput("no contents".into()));
    }
    if metric_scores.len() != user_scales.len() {
        return Err(Error::Invalid("metric and user tables differ in content count".into()));
    }
    let mut wins = 0usize;
    for (m, u) in metric_scores.iter().zip(user_scales) {
        if m.len() != u.len() || m.is_empty() {
            return Err(Error::Invalid("model sets differ between metric and user scale".into()));
        }
        if best_index(m, higher_is_better) == best_index(u, true) {
            wins += 1;
        }
    }
    Ok(wins as f64 / metric_scores.len() as f64)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// AS241 coefficients, lowest order first.
const A: [f64; 8] = [
    3.387132872796366608, 133.14166789178437745, 1971.5909503065514427, 13731.693765509461125,
    45921.953931549871457, 67265.770927008700853, 33430.575583588128105, 2509.0809287301226727,
];
const B: [f64; 8] = [
    1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
    21213.794301586595867, 39307.89580009271061, 28729.085735721942674, 5226.495278852545925,
];
const C: [f64; 8] = [
    1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055, 3.64784832476320460504,
    1.27045825245236838258, 0.24178072517745061177, 0.0227238449892691845833, 7.7454501427834140764e-4,
];
const D: [f64; 8] = [
    1.0, 2.05319162663775882187, 1.6763848301838038494, 0.68976733498510000455,
    0.14810397642748007459, 0.0151986665636164571966, 5.475938084995344946e-4, 1.05075007164441684324e-9,
];
const E: [f64; 8] = [
    6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358, 0.29656057182850489123,
    0.026532189526576123093, 0.0012426609473880784386, 2.71155556874348757815e-5, 2.01033439929228813265e-7,
];
const F: [f64; 8] = [
    1.0, 0.59983220655588793769, 0.13692988092273580531, 0.0148753612908506148525,
    7.868691311456132591e-4, 1.8463183175100546818e-5, 1.4215117583164458887e-7, 2.04426310338993978564e-15,
];

/// Inverse standard normal CDF, Wichura's algorithm AS241 (PPND16),
/// relative accuracy about 1e-16 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let r = (-(if q < 0.0 { p } else { 1.0 - p }).ln()).sqrt();
    let val = if r <= 5.0 {
        horner(&C, r - 1.6) / horner(&D, r - 1.6)
    } else {
        horner(&E, r - 5.0) / horner(&F, r - 5.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Pairwise preference counts; `wins[i][j]` = times item `i` was preferred to item `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    pub items: Vec<String>,
    pub wins: Vec<Vec<u64>>,
}

impl CountMatrix {
    pub fn new(items: Vec<String>, wins: Vec<Vec<u64>>) -> Result<Self> {
        let m = items.len();
        if wins.len() != m || wins.iter().any(|r| r.len() != m) {
            return Err(Error::Shape(format!("count matrix must be {m}x{m}")));
        }
        if (0..m).any(|i| wins[i][i] != 0) {
            return Err(Error::Invalid("count matrix diagonal must be zero".into()));
        }
        Ok(Self { items, wins })
    }

    pub fn zeros(items: Vec<String>) -> Self {
        let m = items.len();
        Self { items, wins: vec![vec![0; m]; m] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j] + self.wins[j][i]
    }
}

/// Mean-centered interval scale over items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScale {
    pub items: Vec<String>,
    pub scores: Vec<f64>,
}

impl QualityScale {
    pub fn score_of(&self, item: &str) -> Option<f64> {
        self.items.iter().position(|i| i == item).map(|k| self.scores[k])
    }

    /// Item ids from best to worst (ties keep input order).
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.items.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx.into_iter().map(|k| self.items[k].as_str()).collect()
    }
}

/// Thurstone Case V by column means.
///
/// Win proportions are clamped to `[1/(2N), 1 - 1/(2N)]` before the probit.
/// Each item's score is the mean of its row of z-values over all `m`
/// columns, the diagonal contributing z = 0; scores are then centered.
pub fn thurstone_scale(counts: &CountMatrix) -> Result<QualityScale> {
    let m = counts.len();
    if m < 2 {
        return Err(Error::InsufficientData("Thurstone scaling needs at least 2 items".into()));
    }
    let mut scores = vec![0.0; m];
    for i in 0..m {
        let mut row = 0.0;
        for j in 0..m {
            if i == j {
                continue;
            }
            let n = counts.total(i, j);
            if n == 0 {
                return Err(Error::InsufficientData(format!(
                    "pair ({}, {}) has no comparisons",
                    counts.items[i], counts.items[j]
                )));
            }
            let lo = 1.0 / (2.0 * n as f64);
            let p = (counts.wins[i][j] as f64 / n as f64).clamp(lo, 1.0 - lo);
            row += normal_quantile(p);
        }
        scores[i] = row / m as f64;
    }
    let mean = scores.iter().sum::<f64>() / m as f64;
    scores.iter_mut().for_each(|s| *s -= mean);
    Ok(QualityScale { items: counts.items.clone(), scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn srcc_fixtures() {
        assert!((srcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((srcc(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap() + 0.5).abs() < 1e-12);
        assert!((srcc(&[1.0, 5.0, 2.0, 8.0], &[-1.0, -5.0, -2.0, -8.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(srcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateInput(_))));
        assert!(srcc(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tied_ranks_are_averaged() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn plcc_fixture_against_direct_formula() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 2.0, 9.0];
        // means 1.5 and 3; Σdxdy = 14, Σdx² = 5, Σdy² = 50
        let expected = 14.0 / (5.0f64 * 50.0).sqrt();
        assert!((plcc(&x, &y).unwrap() - expected).abs() < 1e-12);
        let lin: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((plcc(&x, &lin).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_matches_statrs() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            assert!((normal_quantile(p) - n.inverse_cdf(p)).abs() < 1e-9, "p={p}");
        }
        for p in [1e-12, 1e-8, 1e-4, 1.0 - 1e-6] {
            let z = normal_quantile(p);
            assert!((n.cdf(z) - p).abs() / p.min(1.0 - p) < 1e-9, "p={p}");
        }
        assert!((normal_quantile(0.7) - 0.524400512708041).abs() < 1e-12);
    }

    fn matrix(m: usize, f: impl Fn(usize, usize) -> u64) -> CountMatrix {
        let items = (0..m).map(|i| format!("m{i}")).collect();
        let wins = (0..m).map(|i| (0..m).map(|j| if i == j { 0 } else { f(i, j) }).collect()).collect();
        CountMatrix::new(items, wins).unwrap()
    }

    #[test]
    fn thurstone_fixtures() {
        let even = thurstone_scale(&matrix(4, |_, _| 10)).unwrap();
        assert!(even.scores.iter().all(|s| s.abs() < 1e-15));

        // item i beats every later item 70 times out of 100
        let s = thurstone_scale(&matrix(3, |i, j| if i < j { 70 } else { 30 })).unwrap();
        let z = normal_quantile(0.7);
        let expected = [2.0 * z / 3.0, 0.0, -2.0 * z / 3.0];
        for (a, b) in s.scores.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((s.scores[0] - 0.3496).abs() < 5e-5);
    }

    #[test]
    fn thurstone_clamps_unanimous_pairs() {
        let s = thurstone_scale(&matrix(2, |i, j| if i < j { 4 } else { 0 })).unwrap();
        let z = normal_quantile(1.0 - 1.0 / 8.0);
        assert!((s.scores[0] - z / 2.0).abs() < 1e-12);
        let missing = matrix(3, |i, j| if i + j == 1 { 0 } else { 5 });
        assert!(matches!(thurstone_scale(&missing), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn thurstone_recovers_simulated_order() {
        let mut recovered = 0;
        for seed in 0..50 {
            let mut rng = SplitMix64::new(seed);
            let truth = [1.0, 0.5, 0.0, -0.5, -1.0];
            let n = Normal::new(0.0, 1.0).unwrap();
            let m = truth.len();
            let mut wins = vec![vec![0u64; m]; m];
            for i in 0..m {
                for j in i + 1..m {
                    let p = n.cdf(truth[i] - truth[j]);
                    for _ in 0..1000 {
                        if rng.next_f64() < p {
                            wins[i][j] += 1;
                        } else {
                            wins[j][i] += 1;
                        }
                    }
                }
            }
            let items: Vec<String> = (0..m).map(|i| i.to_string()).collect();
            let s = thurstone_scale(&CountMatrix::new(items, wins).unwrap()).unwrap();
            if s.ranking() == vec!["0", "1", "2", "3", "4"] {
                recovered += 1;
            }
        }
        assert!(recovered >= 49, "{recovered}/50");
    }

    #[test]
    fn winning_rate_fixtures() {
        let users = vec![vec![0.1, 0.9, -1.0], vec![1.0, 0.0, -1.0]];
        assert_eq!(winning_rate(&users, &users, true).unwrap(), 1.0);
        let neg: Vec<Vec<f64>> = users.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        assert_eq!(winning_rate(&neg, &users, true).unwrap(), 0.0);
        assert_eq!(winning_rate(&neg, &users, false).unwrap(), 1.0);

        let mut rng = SplitMix64::new(77);
        let random = |rng: &mut SplitMix64| -> Vec<Vec<f64>> {
            (0..1000).map(|_| (0..7).map(|_| rng.next_f64()).collect()).collect()
        };
        let (a, b) = (random(&mut rng), random(&mut rng));
        let rate = winning_rate(&a, &b, true).unwrap();
        assert!((0.10..=0.19).contains(&rate), "{rate}");
    }

    proptest! {
        #[test]
        fn srcc_monotone_invariance(v in prop::collection::vec(-1e3f64..1e3, 3..30), w in prop::collection::vec(-1e3f64..1e3, 30)) {
            let w = &w[..v.len()];
            if let Ok(base) = srcc(&v, w) {
                let cube: Vec<f64> = v.iter().map(|x| x.powi(3) + 2.0 * x).collect();
                prop_assert!((srcc(&cube, w).unwrap() - base).abs() < 1e-12);
                let aff: Vec<f64> = w.iter().map(|x| 3.0 * x - 7.0).collect();
                prop_assert!((plcc(&v, &aff).unwrap() - plcc(&v, w).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn thurstone_permutation_and_scaling(seed in 0u64..1000, k in 2u64..6) {
            let mut rng = SplitMix64::new(seed);
            let m = 4;
            let mut wins = vec![vec![0u64; m]; m];
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        wins[i][j] = 1 + rng.below(20);
                    }
                }
            }
            let items: Vec<String> = (0..m).map(|i| format!("i{i}")).collect();
            let base = thurstone_scale(&CountMatrix::new(items.clone(), wins.clone()).unwrap()).unwrap();

            let perm = [2usize, 0, 3, 1];
            let pw = (0..m).map(|i| (0..m).map(|j| wins[perm[i]][perm[j]]).collect()).collect();
            let pi = perm.iter().map(|&k| items[k].clone()).collect();
            let permuted = thurstone_scale(&CountMatrix::new(pi, pw).unwrap()).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                prop_assert!((permuted.scores[k] - base.scores[p]).abs() < 1e-12);
            }
            prop_assert!(base.scores.iter().sum::<f64>().abs() < 1e-12);

            // all counts are nonzero, so scaling keeps every proportion inside the clamp
            let scaled = wins.iter().map(|r| r.iter().map(|v| v * k).collect()).collect();
            let d = thurstone_scale(&CountMatrix::new(items.clone(), scaled).unwrap()).unwrap();
            for (a, b) in d.scores.iter().zip(&base.scores) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
