//! GT-quality discard sweeps: drop the lowest-quality references and watch
//! per-model metric means move, against a random-discard control.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{Direction, DirectionMap};
use crate::rng::{derive_seed_index, SplitMix64};
use crate::table::{MetricGrid, MetricScoreTable};

pub const DEFAULT_FRACTIONS: [f64; 9] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

/// Mean score of every model at every fraction for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurves {
    pub metric: String,
    pub direction: Direction,
    /// `[model][fraction]`.
    pub means: Vec<Vec<f64>>,
}

impl MetricCurves {
    /// 1-based ranks of each model at fraction index `f`; ties keep model id order.
    pub fn ranks(&self, f: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.means.len()).collect();
        let key = |m: usize| self.means[m][f];
        order.sort_by(|&a, &b| {
            let c = key(a).total_cmp(&key(b));
            if self.direction.higher_is_better() { c.reverse() } else { c }
        });
        let mut ranks = vec![0; order.len()];
        for (r, m) in order.into_iter().enumerate() {
            ranks[m] = r + 1;
        }
        ranks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub fractions: Vec<f64>,
    pub models: Vec<String>,
    pub curves: Vec<MetricCurves>,
    /// Retained content count per fraction.
    pub retained: Vec<usize>,
}

impl SweepResult {
    pub fn curves_for(&self, metric: &str) -> Option<&MetricCurves> {
        self.curves.iter().find(|c| c.metric == metric)
    }

    /// Model ids best-first at fraction index `f` for `metric`.
    pub fn ranking(&self, metric: &str, f: usize) -> Option<Vec<&str>> {
        let ranks = self.curves_for(metric)?.ranks(f);
        let mut ids: Vec<(usize, &str)> = ranks.into_iter().zip(self.models.iter().map(String::as_str)).collect();
        ids.sort();
        Some(ids.into_iter().map(|x| x.1).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlCurves {
    pub metric: String,
    /// `[model][fraction]`.
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    pub fractions: Vec<f64>,
    pub models: Vec<String>,
    pub trials: usize,
    pub curves: Vec<ControlCurves>,
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::EmptyInput("no discard fractions".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
        return Err(Error::Invalid(format!("discard fraction {f} outside [0, 1)")));
    }
    Ok(())
}

/// `floor(f·n)`, tolerant of `0.3 * 10 = 2.9999…` style rounding.
pub fn discard_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

struct Prepared {
    grids: Vec<MetricGrid>,
    directions: Vec<Direction>,
    contents: Vec<String>,
    models: Vec<String>,
}

fn prepare(table: &MetricScoreTable, directions: &DirectionMap) -> Result<Prepared> {
    let metrics = table.metrics();
    if metrics.is_empty() {
        return Err(Error::EmptyInput("score table has no rows".into()));
    }
    let grids = metrics.iter().map(|m| table.grid(m)).collect::<Result<Vec<_>>>()?;
    let dirs = metrics.iter().map(|m| directions.get(m)).collect::<Result<Vec<_>>>()?;
    Ok(Prepared { contents: grids[0].contents.clone(), models: grids[0].models.clone(), grids, directions: dirs })
}

fn mean_over(grid: &MetricGrid, model: usize, keep: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (c, &k) in keep.iter().enumerate() {
        if k {
            sum += grid.scores[c][model];
            n += 1;
        }
    }
    sum / n as f64
}

/// Quality-ordered sweep: at fraction `f` the `floor(f·n)` contents with the
/// lowest `gt_quality` (ties by content id) are dropped.
pub fn discard_sweep(table: &MetricScoreTable, fractions: &[f64], directions: &DirectionMap) -> Result<SweepResult> {
    check_fractions(fractions)?;
    let p = prepare(table, directions)?;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(p.contents.len());
    for (i, c) in p.contents.iter().enumerate() {
        let q = table
            .gt_quality
            .get(c)
            .ok_or_else(|| Error::Schema(format!("content `{c}` has no gt_quality")))?;
        order.push((*q, i));
    }
    // content ids are sorted, so index order breaks quality ties by id
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = order.len();
    let keeps: Vec<Vec<bool>> = fractions
        .iter()
        .map(|&f| {
            let mut keep = vec![true; n];
            for &(_, i) in &order[..discard_count(f, n)] {
                keep[i] = false;
            }
            keep
        })
        .collect();
    let curves = p
        .grids
        .iter()
        .zip(&p.directions)
        .map(|(g, &direction)| MetricCurves {
            metric: g.metric.clone(),
            direction,
            means: (0..p.models.len()).map(|m| keeps.iter().map(|k| mean_over(g, m, k)).collect()).collect(),
        })
        .collect();
    Ok(SweepResult {
        fractions: fractions.to_vec(),
        models: p.models,
        curves,
        retained: fractions.iter().map(|&f| n - discard_count(f, n)).collect(),
    })
}

/// Random-discard control: each trial drops a uniformly random
/// `floor(f·n)`-subset per fraction, seeded by `(seed, trial)`.
pub fn random_discard_control(
    table: &MetricScoreTable,
    fractions: &[f64],
    trials: usize,
    seed: u64,
    directions: &DirectionMap,
) -> Result<ControlResult> {
    check_fractions(fractions)?;
    if trials < 2 {
        return Err(Error::Invalid("the random control needs at least 2 trials".into()));
    }
    let p = prepare(table, directions)?;
    let n = p.contents.len();
    // samples[trial][metric][model][fraction]
    let samples: Vec<Vec<Vec<Vec<f64>>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::new(derive_seed_index(seed, t as u64));
            let keeps: Vec<Vec<bool>> = fractions
                .iter()
                .map(|&f| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    rng.shuffle(&mut idx);
                    let mut keep = vec![true; n];
                    for &i in &idx[..discard_count(f, n)] {
                        keep[i] = false;
                    }
                    keep
                })
                .collect();
            p.grids
                .iter()
                .map(|g| (0..p.models.len()).map(|m| keeps.iter().map(|k| mean_over(g, m, k)).collect()).collect())
                .collect()
        })
        .collect();
    let curves = p
        .grids
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let mut mean = vec![vec![0.0; fractions.len()]; p.models.len()];
            let mut std = mean.clone();
            for m in 0..p.models.len() {
                for f in 0..fractions.len() {
                    let xs: Vec<f64> = samples.iter().map(|s| s[gi][m][f]).collect();
                    let mu = xs.iter().sum::<f64>() / trials as f64;
                    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (trials - 1) as f64;
                    mean[m][f] = mu;
                    std[m][f] = var.sqrt();
                }
            }
            ControlCurves { metric: g.metric.clone(), mean, std }
        })
        .collect();
    Ok(ControlResult { fractions: fractions.to_vec(), models: p.models, trials, curves })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankChange {
    pub metric: String,
    pub model: String,
    pub rank_start: usize,
    pub rank_end: usize,
    /// `rank_start - rank_end`: positive when the model climbs.
    pub delta: i64,
}

/// Rank of every model at the first and last fraction of the sweep, per metric.
pub fn rank_change_report(sweep: &SweepResult) -> Result<Vec<RankChange>> {
    if sweep.fractions.len() < 2 {
        return Err(Error::Invalid("rank changes need at least two fractions".into()));
    }
    let last = sweep.fractions.len() - 1;
    let mut out = Vec::new();
    for c in &sweep.curves {
        let (r0, r1) = (c.ranks(0), c.ranks(last));
        for (m, model) in sweep.models.iter().enumerate() {
            out.push(RankChange {
                metric: c.metric.clone(),
                model: model.clone(),
                rank_start: r0[m],
                rank_end: r1[m],
                delta: r0[m] as i64 - r1[m] as i64,
            });
        }
    }
    Ok(out)
}

pub fn write_rank_changes(rows: &[RankChange], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "model", "rank_start", "rank_end", "delta"])?;
    for r in rows {
        w.write_record([r.metric.clone(), r.model.clone(), r.rank_start.to_string(), r.rank_end.to_string(), r.delta.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sweep.csv`, `control.csv` and `sweep_<metric>.svg` into `out_dir`.
pub fn emit_sweep_artifacts(sweep: &SweepResult, control: &ControlResult, out_dir: impl AsRef<Path>) -> Result<()> {
    if sweep.fractions != control.fractions || sweep.models != control.models {
        return Err(Error::Invalid("sweep and control use different fraction grids or models".into()));
    }
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["metric", "model", "fraction", "mean"])?;
    for c in &sweep.curves {
        for (m, model) in sweep.models.iter().enumerate() {
            for (f, frac) in sweep.fractions.iter().enumerate() {
                w.write_record([c.metric.clone(), model.clone(), frac.to_string(), c.means[m][f].to_string()])?;
            }
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("control.csv"))?;
    w.write_record(["metric", "model", "fraction", "mean", "std"])?;
    for c in &control.curves {
        for (m, model) in control.models.iter().enumerate() {
            for (f, frac) in control.fractions.iter().enumerate() {
                w.write_record([
                    c.metric.clone(),
                    model.clone(),
                    frac.to_string(),
                    c.mean[m][f].to_string(),
                    c.std[m][f].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    for c in &sweep.curves {
        let ctrl = control
            .curves
            .iter()
            .find(|k| k.metric == c.metric)
            .ok_or_else(|| Error::Invalid(format!("control lacks metric `{}`", c.metric)))?;
        std::fs::write(out.join(format!("sweep_{}.svg", file_stem(&c.metric))), sweep_svg(sweep, c, ctrl))?;
    }
    Ok(())
}

fn file_stem(metric: &str) -> String {
    metric.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn sweep_svg(sweep: &SweepResult, curves: &MetricCurves, ctrl: &ControlCurves) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 150.0, 30.0, 50.0);
    let finite = |v: &f64| v.is_finite();
    let mut values: Vec<f64> = curves.means.iter().flatten().copied().filter(finite).collect();
    for (m, s) in ctrl.mean.iter().zip(&ctrl.std) {
        for (a, b) in m.iter().zip(s) {
            values.push(a - b);
            values.push(a + b);
        }
    }
    values.retain(finite);
    let (mut lo, mut hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let fx0 = sweep.fractions[0];
    let fx1 = *sweep.fractions.last().unwrap();
    let span = if fx1 > fx0 { fx1 - fx0 } else { 1.0 };
    let px = |f: f64| left + (f - fx0) / span * (w - left - right);
    let py = |v: f64| top + (hi - v.clamp(lo, hi)) / (hi - lo) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{} ({} is better)</text>"#,
        (w - right + left) / 2.0,
        xml_escape(&curves.metric),
        curves.direction
    );
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for &f in &sweep.fractions {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}%</text>"#,
            px(f),
            y1 + 15.0,
            (f * 100.0).round()
        );
    }
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{:.3}</text>"#,
            x0 - 5.0,
            py(v) + 3.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">fraction of lowest-quality GTs discarded</text>"#,
        (x0 + x1) / 2.0,
        h - 12.0
    );
    for (m, model) in sweep.models.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let upper = sweep.fractions.iter().enumerate().map(|(f, &x)| (px(x), py(ctrl.mean[m][f] + ctrl.std[m][f])));
        let lower = sweep.fractions.iter().enumerate().rev().map(|(f, &x)| (px(x), py(ctrl.mean[m][f] - ctrl.std[m][f])));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> =
            sweep.fractions.iter().enumerate().map(|(f, &x)| format!("{:.2},{:.2}", px(x), py(curves.means[m][f]))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = top + 10.0 + 18.0 * m as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#, x1 + 10.0, ly - 3.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x1 + 27.0,
            ly + 1.0,
            xml_escape(model)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ScoreRow;
    use std::collections::BTreeMap;

    /// Ten contents; "good" scores fall with GT quality, "flat" is constant.
    fn table() -> MetricScoreTable {
        let mut rows = Vec::new();
        let mut q = BTreeMap::new();
        for i in 0..10 {
            let c = format!("c{i}");
            q.insert(c.clone(), i as f64);
            rows.push(ScoreRow::new(&c, "good", "ssim", 0.9 - 0.05 * i as f64));
            rows.push(ScoreRow::new(&c, "flat", "ssim", 0.6));
            rows.push(ScoreRow::new(&c, "good", "niqe", 3.0 + i as f64));
            rows.push(ScoreRow::new(&c, "flat", "niqe", 6.0));
        }
        MetricScoreTable::new(rows).with_gt_quality(q)
    }

    #[test]
    fn sweep_matches_brute_force() {
        let t = table();
        let s = discard_sweep(&t, &DEFAULT_FRACTIONS, &DirectionMap::default()).unwrap();
        assert_eq!(s.retained, vec![10, 9, 8, 7, 6, 5, 4, 3, 2]);
        let ssim = s.curves_for("ssim").unwrap();
        let good = s.models.iter().position(|m| m == "good").unwrap();
        for (f, &frac) in DEFAULT_FRACTIONS.iter().enumerate() {
            let k = discard_count(frac, 10);
            let brute: f64 = (k..10).map(|i| 0.9 - 0.05 * i as f64).sum::<f64>() / (10 - k) as f64;
            assert_eq!(ssim.means[good][f], brute);
        }
        assert_eq!(s.ranking("ssim", 0).unwrap(), vec!["good", "flat"]);
        assert_eq!(s.ranking("ssim", 8).unwrap(), vec!["flat", "good"]);
        // niqe is lower-better: good (mean 7.5) loses to flat at 0%
        assert_eq!(s.ranking("niqe", 0).unwrap(), vec!["flat", "good"]);
    }

    #[test]
    fn order_only_dependence() {
        let t = table();
        let mut t2 = t.clone();
        for v in t2.gt_quality.values_mut() {
            *v = (*v * 0.3).exp() - 7.0;
        }
        let d = DirectionMap::default();
        assert_eq!(discard_sweep(&t, &DEFAULT_FRACTIONS, &d).unwrap(), discard_sweep(&t2, &DEFAULT_FRACTIONS, &d).unwrap());
    }

    #[test]
    fn ties_break_by_content_id() {
        let mut t = table();
        for v in t.gt_quality.values_mut() {
            *v = 1.0;
        }
        let s = discard_sweep(&t, &[0.0, 0.2], &DirectionMap::default()).unwrap();
        // c0 and c1 go first
        let good = s.models.iter().position(|m| m == "good").unwrap();
        let expect = (2..10).map(|i| 0.9 - 0.05 * i as f64).sum::<f64>() / 8.0;
        assert_eq!(s.curves_for("ssim").unwrap().means[good][1], expect);
    }

    #[test]
    fn errors() {
        let d = DirectionMap::default();
        let mut t = table();
        t.gt_quality.remove("c3");
        assert!(matches!(discard_sweep(&t, &DEFAULT_FRACTIONS, &d), Err(Error::Schema(_))));
        assert!(matches!(discard_sweep(&table(), &[0.0, 1.0], &d), Err(Error::Invalid(_))));
        assert!(matches!(discard_sweep(&table(), &[0.0], &DirectionMap::empty()), Err(Error::Schema(_))));
    }

    #[test]
    fn control_cardinality_and_determinism() {
        let t = table();
        let d = DirectionMap::default();
        let a = random_discard_control(&t, &DEFAULT_FRACTIONS, 50, 3, &d).unwrap();
        assert_eq!(a, random_discard_control(&t, &DEFAULT_FRACTIONS, 50, 3, &d).unwrap());
        let ssim = a.curves.iter().find(|c| c.metric == "ssim").unwrap();
        let flat = a.models.iter().position(|m| m == "flat").unwrap();
        let good = a.models.iter().position(|m| m == "good").unwrap();
        // a constant model has the same mean at every fraction and zero spread
        for f in 0..DEFAULT_FRACTIONS.len() {
            assert!((ssim.mean[flat][f] - 0.6).abs() < 1e-12);
            assert!(ssim.std[flat][f] < 1e-12);
        }
        assert!(ssim.std[good][0] < 1e-12);
        assert!(ssim.std[good][8] > 0.0);
    }

    #[test]
    fn rank_changes_and_artifacts() {
        let t = table();
        let d = DirectionMap::default();
        let s = discard_sweep(&t, &DEFAULT_FRACTIONS, &d).unwrap();
        let rc = rank_change_report(&s).unwrap();
        assert_eq!(rc.len(), 4);
        let g = rc.iter().find(|r| r.metric == "ssim" && r.model == "good").unwrap();
        assert_eq!((g.rank_start, g.rank_end, g.delta), (1, 2, -1));
        let c = random_discard_control(&t, &DEFAULT_FRACTIONS, 10, 1, &d).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_sweep_artifacts(&s, &c, dir.path()).unwrap();
        let sweep_csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(sweep_csv.lines().count(), 1 + 2 * 2 * 9);
        assert!(sweep_csv.starts_with("metric,model,fraction,mean\n"));
        let control_csv = std::fs::read_to_string(dir.path().join("control.csv")).unwrap();
        assert_eq!(control_csv.lines().count(), 1 + 2 * 2 * 9);
        assert!(dir.path().join("sweep_ssim.svg").exists() && dir.path().join("sweep_niqe.svg").exists());
    }
}
