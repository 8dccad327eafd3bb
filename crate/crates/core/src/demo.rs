//! A miniature SR benchmark where the reference images themselves are
//! degraded to different degrees. A "sharp" model restores the true scene;
//! a "blurry" model reproduces the degraded reference with extra blur. FR
//! metrics anchored on the degraded reference prefer the blurry model on the
//! worst references, and discarding those references closes the gap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{
    discard_sweep, emit_sweep_artifacts, random_discard_control, rank_change_report, write_rank_changes, ControlResult,
    SweepResult, DEFAULT_FRACTIONS,
};
use crate::corpus::mini_corpus;
use crate::distortion::{default_families, make_dataset, pseudo_mos, Distortion, GaussianBlur, GaussianNoise};
use crate::error::{Error, Result};
use crate::fr::{psnr, ssim, SsimParams};
use crate::image::{to_luma, ImageBuffer};
use crate::metrics::DirectionMap;
use crate::nss::{fit_pristine_model, niqe_score, PristineModel, DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_QUANTILE};
use crate::rng::{derive_seed, derive_seed_index, SplitMix64};
use crate::rqi::{crop_features, score_from_features, train_mode, HeadMode, InferenceProtocol, RqiModel, TrainConfig};
use crate::table::{write_gt_quality, MetricScoreTable, ScoreRow};

pub const SHARP: &str = "sharp";
pub const BLURRY: &str = "blurry";

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub seed: u64,
    pub contents: usize,
    pub side: usize,
    /// Reference blur σ spans `[min, max]` across contents.
    pub gt_blur: (f64, f64),
    pub sharp_noise_sigma: f64,
    pub blurry_sigma: f64,
    pub niqe_corpus: usize,
    pub rqi_train_contents: usize,
    pub rqi_epochs: usize,
    pub control_trials: usize,
    /// Contents whose reference quality falls in this lowest fraction count
    /// as low-quality references.
    pub low_quality_fraction: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            contents: 30,
            side: 384,
            gt_blur: (0.4, 3.0),
            sharp_noise_sigma: 1.5,
            blurry_sigma: 1.5,
            niqe_corpus: 30,
            rqi_train_contents: 20,
            rqi_epochs: 3,
            control_trials: 200,
            low_quality_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub table: MetricScoreTable,
    pub sweep: SweepResult,
    pub control: ControlResult,
    pub low_quality_contents: usize,
    /// Among low-quality references: fraction where blurry beats sharp.
    pub psnr_prefers_blurry: f64,
    pub ssim_prefers_blurry: f64,
    /// Over all contents: fraction where RQI scores sharp above blurry.
    pub rqi_prefers_sharp: f64,
    /// Same, judged by pseudo-MOS against the undegraded scene.
    pub oracle_prefers_sharp: f64,
    /// Mean SSIM of blurry minus sharp at each sweep fraction.
    pub ssim_gap: Vec<f64>,
    /// Largest `|control mean - 0% mean| / control std` over every metric,
    /// model and nonzero fraction.
    pub control_max_z: f64,
}

impl DemoReport {
    pub fn ssim_gap_narrows(&self) -> bool {
        self.ssim_gap.windows(2).all(|w| w[1] < w[0])
    }

    pub fn control_within(&self, k: f64) -> bool {
        self.control_max_z <= k
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "contents\t{}", self.table.contents().len());
        let _ = writeln!(s, "low_quality_contents\t{}", self.low_quality_contents);
        let _ = writeln!(s, "psnr_prefers_blurry_on_low_quality\t{:.4}", self.psnr_prefers_blurry);
        let _ = writeln!(s, "ssim_prefers_blurry_on_low_quality\t{:.4}", self.ssim_prefers_blurry);
        let _ = writeln!(s, "rqi_prefers_sharp\t{:.4}", self.rqi_prefers_sharp);
        let _ = writeln!(s, "oracle_prefers_sharp\t{:.4}", self.oracle_prefers_sharp);
        let gaps: Vec<String> = self.ssim_gap.iter().map(|g| format!("{g:.5}")).collect();
        let _ = writeln!(s, "ssim_gap_by_fraction\t{}", gaps.join(","));
        let _ = writeln!(s, "ssim_gap_narrows\t{}", self.ssim_gap_narrows());
        let _ = writeln!(s, "control_max_z\t{:.4}", self.control_max_z);
        s
    }
}

struct Item {
    id: String,
    pristine: ImageBuffer,
    gt: ImageBuffer,
    sharp: ImageBuffer,
    blurry: ImageBuffer,
}

fn synthesize(config: &DemoConfig) -> Result<Vec<Item>> {
    let corpus = mini_corpus(config.contents, config.side, derive_seed(config.seed, "demo-corpus"))?;
    // severities are spread evenly, then shuffled so they don't follow content ids
    let n = corpus.len();
    let mut levels: Vec<f64> = (0..n).map(|i| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 }).collect();
    SplitMix64::new(derive_seed(config.seed, "demo-severity")).shuffle(&mut levels);
    let (lo, hi) = config.gt_blur;
    corpus
        .into_par_iter()
        .zip(levels)
        .enumerate()
        .map(|(i, ((id, pristine), level))| {
            let gt = GaussianBlur.apply_strength(&pristine, lo + (hi - lo) * level, 0)?;
            let noise_seed = derive_seed_index(derive_seed(config.seed, "demo-sharp"), i as u64);
            let sharp = GaussianNoise.apply_strength(&pristine, config.sharp_noise_sigma, noise_seed)?;
            let blurry = GaussianBlur.apply_strength(&gt, config.blurry_sigma, 0)?;
            Ok(Item { id, pristine, gt, sharp, blurry })
        })
        .collect()
}

fn fit_niqe(config: &DemoConfig) -> Result<PristineModel> {
    let corpus = mini_corpus(config.niqe_corpus, config.side, derive_seed(config.seed, "demo-niqe"))?;
    let planes: Vec<_> = corpus.iter().map(|(_, img)| to_luma(img)).collect();
    fit_pristine_model(&planes, DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_QUANTILE)
}

fn train_rqi(config: &DemoConfig) -> Result<RqiModel> {
    let corpus = mini_corpus(config.rqi_train_contents, config.side, derive_seed(config.seed, "demo-rqi"))?;
    let seqs = make_dataset(&corpus, &default_families(), derive_seed(config.seed, "demo-dataset"))?;
    let cfg = TrainConfig { epochs: config.rqi_epochs, seed: config.seed, ..Default::default() };
    Ok(train_mode(&seqs, "arbitrary", HeadMode::Antisymmetric, &cfg)?.model)
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Runs the benchmark. A supplied `rqi` model is used as is; otherwise one is
/// trained on a separate synthetic dataset.
pub fn run_demo(config: &DemoConfig, rqi: Option<RqiModel>) -> Result<DemoReport> {
    if config.contents < 4 {
        return Err(Error::InsufficientData("the demo needs at least 4 contents".into()));
    }
    let items = synthesize(config)?;
    let niqe = fit_niqe(config)?;
    let rqi = match rqi {
        Some(m) => m,
        None => train_rqi(config)?,
    };
    let protocol = InferenceProtocol { seed: config.seed, ..Default::default() };
    let params = SsimParams::default();

    let per_item: Vec<(Vec<ScoreRow>, f64, bool)> = items
        .par_iter()
        .map(|it| {
            let (g, s, b) = (to_luma(&it.gt), to_luma(&it.sharp), to_luma(&it.blurry));
            let fg = crop_features(&rqi, &it.gt, &protocol)?;
            let mut rows = Vec::new();
            for (model, plane, img) in [(SHARP, &s, &it.sharp), (BLURRY, &b, &it.blurry)] {
                let fm = crop_features(&rqi, img, &protocol)?;
                rows.push(ScoreRow::new(&it.id, model, "psnr", psnr(plane, &g, 255.0)?));
                rows.push(ScoreRow::new(&it.id, model, "ssim", ssim(plane, &g, &params)?.mean));
                rows.push(ScoreRow::new(&it.id, model, "niqe", niqe_score(plane, &niqe)?));
                rows.push(ScoreRow::new(&it.id, model, "rqi", score_from_features(&rqi, &fm, &fg)?));
            }
            let p = to_luma(&it.pristine);
            let oracle = pseudo_mos(&s, &p)? > pseudo_mos(&b, &p)?;
            Ok((rows, -niqe_score(&g, &niqe)?, oracle))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut gt_quality = BTreeMap::new();
    let mut oracle_hits = 0;
    for (it, (r, q, oracle)) in items.iter().zip(per_item) {
        rows.extend(r);
        gt_quality.insert(it.id.clone(), q);
        oracle_hits += oracle as usize;
    }
    let table = MetricScoreTable::new(rows).with_gt_quality(gt_quality);
    let directions = DirectionMap::default();
    let sweep = discard_sweep(&table, &DEFAULT_FRACTIONS, &directions)?;
    let control =
        random_discard_control(&table, &DEFAULT_FRACTIONS, config.control_trials, derive_seed(config.seed, "demo-control"), &directions)?;

    let score = |metric: &str, c: usize, model: usize| -> Result<f64> {
        let g = table.grid(metric)?;
        Ok(g.scores[c][model])
    };
    let models = table.models();
    let (si, bi) = (
        models.iter().position(|m| m == SHARP).unwrap(),
        models.iter().position(|m| m == BLURRY).unwrap(),
    );
    let contents = table.contents();
    let mut by_quality: Vec<usize> = (0..contents.len()).collect();
    by_quality.sort_by(|&a, &b| table.gt_quality[&contents[a]].total_cmp(&table.gt_quality[&contents[b]]).then(a.cmp(&b)));
    let low = &by_quality[..((contents.len() as f64 * config.low_quality_fraction).round() as usize).max(1)];
    let mut psnr_hits = 0;
    let mut ssim_hits = 0;
    for &c in low {
        psnr_hits += (score("psnr", c, bi)? > score("psnr", c, si)?) as usize;
        ssim_hits += (score("ssim", c, bi)? > score("ssim", c, si)?) as usize;
    }
    let mut rqi_hits = 0;
    for c in 0..contents.len() {
        rqi_hits += (score("rqi", c, si)? > score("rqi", c, bi)?) as usize;
    }
    let ssim_curves = sweep.curves_for("ssim").unwrap();
    let ssim_gap = (0..sweep.fractions.len()).map(|f| ssim_curves.means[bi][f] - ssim_curves.means[si][f]).collect();

    let mut control_max_z: f64 = 0.0;
    for (sc, cc) in sweep.curves.iter().zip(&control.curves) {
        for m in 0..models.len() {
            let base = sc.means[m][0];
            for f in 1..control.fractions.len() {
                let dev = (cc.mean[m][f] - base).abs();
                let z = if cc.std[m][f] > 0.0 {
                    dev / cc.std[m][f]
                } else if dev == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                control_max_z = control_max_z.max(z);
            }
        }
    }

    Ok(DemoReport {
        low_quality_contents: low.len(),
        psnr_prefers_blurry: fraction(psnr_hits, low.len()),
        ssim_prefers_blurry: fraction(ssim_hits, low.len()),
        rqi_prefers_sharp: fraction(rqi_hits, contents.len()),
        oracle_prefers_sharp: fraction(oracle_hits, contents.len()),
        ssim_gap,
        control_max_z,
        table,
        sweep,
        control,
    })
}

/// Writes `scores.csv`, `gt_quality.csv`, sweep artifacts, `rank_changes.csv`
/// and `report.tsv` into `out_dir`.
pub fn write_demo_artifacts(report: &DemoReport, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out)?;
    report.table.write_scores(out.join("scores.csv"))?;
    write_gt_quality(&report.table.gt_quality, out.join("gt_quality.csv"))?;
    emit_sweep_artifacts(&report.sweep, &report.control, out)?;
    write_rank_changes(&rank_change_report(&report.sweep)?, out.join("rank_changes.csv"))?;
    std::fs::write(out.join("report.tsv"), report.summary())?;
    Ok(())
}

/// [`run_demo`] followed by [`write_demo_artifacts`].
pub fn end_to_end_demo(config: &DemoConfig, rqi: Option<RqiModel>, out_dir: impl AsRef<Path>) -> Result<DemoReport> {
    let report = run_demo(config, rqi)?;
    write_demo_artifacts(&report, out_dir)?;
    Ok(report)
}
