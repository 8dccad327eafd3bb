//! Corpus-level properties of the distortion ladders and NIQE.

use std::sync::OnceLock;

use rqi_core::corpus::mini_corpus;
use rqi_core::distortion::{default_families, make_dataset, DistortedSequence, Distortion, GaussianNoise};
use rqi_core::fr::psnr;
use rqi_core::image::{to_luma, ImageBuffer};
use rqi_core::nss::{fit_pristine_model, niqe_score, PristineModel, DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_QUANTILE};

fn corpus() -> &'static [(String, ImageBuffer)] {
    static C: OnceLock<Vec<(String, ImageBuffer)>> = OnceLock::new();
    C.get_or_init(|| mini_corpus(30, 384, 2024).unwrap())
}

fn dataset() -> &'static [DistortedSequence] {
    static D: OnceLock<Vec<DistortedSequence>> = OnceLock::new();
    D.get_or_init(|| make_dataset(corpus(), &default_families(), 7).unwrap())
}

fn niqe_model() -> &'static PristineModel {
    static M: OnceLock<PristineModel> = OnceLock::new();
    M.get_or_init(|| {
        let planes: Vec<_> = mini_corpus(30, 384, 99).unwrap().iter().map(|(_, i)| to_luma(i)).collect();
        fit_pristine_model(&planes, DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_QUANTILE).unwrap()
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn pseudo_mos_stays_inside_the_open_range() {
    for seq in dataset() {
        for v in &seq.variants {
            assert!(v.pseudo_mos > 0.0 && v.pseudo_mos < 100.0, "{} {}: {}", seq.content_id, v.spec.variant_id(), v.pseudo_mos);
        }
    }
}

#[test]
fn worst_severity_sits_below_every_other_family_mildest() {
    let families = default_families();
    for fa in &families {
        for fb in families.iter().filter(|f| *f != fa) {
            let mut hits = 0;
            for seq in dataset() {
                let q = |f: &str, s: u8| seq.variants.iter().find(|v| v.spec.family == f && v.spec.severity == s).unwrap().pseudo_mos;
                hits += (q(fa, 5) < q(fb, 1)) as usize;
            }
            let rate = hits as f64 / dataset().len() as f64;
            assert!(rate >= 0.8, "{fa}-5 below {fb}-1 on only {rate:.2} of images");
        }
    }
}

#[test]
fn psnr_falls_as_noise_grows() {
    for (id, img) in corpus() {
        let p = to_luma(img);
        let scores: Vec<f64> = [2.0, 5.0, 10.0, 20.0, 30.0]
            .iter()
            .map(|&s| psnr(&to_luma(&GaussianNoise.apply_strength(img, s, 5).unwrap()), &p, 255.0).unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[1] < w[0]), "{id}: {scores:?}");
    }
}

#[test]
fn niqe_median_is_monotone_in_severity() {
    let model = niqe_model();
    for fam in default_families() {
        let medians: Vec<f64> = (1..=5u8)
            .map(|s| {
                median(
                    dataset()
                        .iter()
                        .map(|seq| {
                            let v = seq.variants.iter().find(|v| v.spec.family == fam && v.spec.severity == s).unwrap();
                            niqe_score(&to_luma(&v.image), model).unwrap()
                        })
                        .collect(),
                )
            })
            .collect();
        let pristine = median(dataset().iter().map(|s| niqe_score(&to_luma(&s.pristine), model).unwrap()).collect());
        let mut ladder = vec![pristine];
        ladder.extend(&medians);
        assert!(ladder.windows(2).all(|w| w[1] >= w[0]), "{fam}: {ladder:?}");
    }
}

#[test]
fn niqe_prefers_pristine_over_heavy_noise() {
    let model = niqe_model();
    let wins = corpus()
        .iter()
        .enumerate()
        .filter(|(i, (_, img))| {
            let noisy = GaussianNoise.apply_strength(img, 30.0, *i as u64).unwrap();
            niqe_score(&to_luma(img), model).unwrap() < niqe_score(&to_luma(&noisy), model).unwrap()
        })
        .count();
    assert!(wins * 10 >= corpus().len() * 9, "pristine won {wins}/30");
}

#[test]
fn niqe_is_nearly_mirror_invariant() {
    let model = niqe_model();
    for (id, img) in corpus() {
        let p = to_luma(img);
        let a = niqe_score(&p, model).unwrap();
        let b = niqe_score(&p.mirror(), model).unwrap();
        assert!((a - b).abs() <= 0.05 * a.abs().max(b.abs()), "{id}: {a} vs mirrored {b}");
    }
}
