//! Agreement between metric scores and per-content user scales.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DirectionMap;
use crate::stats::{plcc, srcc, winning_rate};
use crate::table::{MetricScoreTable, UserScales};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub metric: String,
    pub mean_srcc: f64,
    pub mean_plcc: f64,
    pub winning_rate: f64,
    pub n_contents: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyOptions {
    /// Item id of the reference image in the user scales.
    pub reference_id: String,
    /// Correlate over model outputs plus the reference instead of outputs only.
    pub include_reference: bool,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self { reference_id: "gt".into(), include_reference: false }
    }
}

/// One row per metric. Lower-is-better metrics are negated before
/// correlating so that agreement is positive for every metric. Contents on
/// which either side is constant are skipped for SRCC/PLCC and counted.
pub fn per_content_consistency(
    table: &MetricScoreTable,
    users: &UserScales,
    directions: &DirectionMap,
    options: &ConsistencyOptions,
) -> Result<Vec<ConsistencyRow>> {
    let keep = |id: &str| options.include_reference || id != options.reference_id;
    let mut out = Vec::new();
    for metric in table.metrics() {
        let dir = directions.get(&metric)?;
        let grid = table.grid(&metric)?;
        let models: Vec<usize> = (0..grid.models.len()).filter(|&m| keep(&grid.models[m])).collect();
        let mut metric_rows = Vec::new();
        let mut user_rows = Vec::new();
        for (c, content) in grid.contents.iter().enumerate() {
            let scale = users
                .get(content)
                .ok_or_else(|| Error::Schema(format!("no user scale for content `{content}`")))?;
            let user_ids: Vec<&String> = scale.keys().filter(|k| keep(k)).collect();
            let model_ids: Vec<&String> = models.iter().map(|&m| &grid.models[m]).collect();
            if user_ids != model_ids {
                return Err(Error::Schema(format!("model ids differ between metric table and user scale for `{content}`")));
            }
            metric_rows.push(models.iter().map(|&m| grid.scores[c][m]).collect::<Vec<_>>());
            user_rows.push(model_ids.iter().map(|id| scale[*id]).collect::<Vec<_>>());
        }
        let (mut s_sum, mut p_sum, mut used, mut skipped) = (0.0, 0.0, 0usize, 0usize);
        for (m, u) in metric_rows.iter().zip(&user_rows) {
            let oriented: Vec<f64> = if dir.higher_is_better() { m.clone() } else { m.iter().map(|v| -v).collect() };
            match (srcc(&oriented, u), plcc(&oriented, u)) {
                (Ok(s), Ok(p)) => {
                    s_sum += s;
                    p_sum += p;
                    used += 1;
                }
                (Err(Error::DegenerateInput(_)), _) | (_, Err(Error::DegenerateInput(_))) => skipped += 1,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        let avg = |s: f64| if used == 0 { f64::NAN } else { s / used as f64 };
        out.push(ConsistencyRow {
            metric: metric.clone(),
            mean_srcc: avg(s_sum),
            mean_plcc: avg(p_sum),
            winning_rate: winning_rate(&metric_rows, &user_rows, dir.higher_is_better())?,
            n_contents: grid.contents.len(),
            n_skipped: skipped,
        });
    }
    Ok(out)
}

pub fn write_consistency_report(rows: &[ConsistencyRow], path: impl AsRef<Path>) -> Result<()> {
    write_consistency_to(rows, std::fs::File::create(path)?)
}

pub fn write_consistency_to<W: std::io::Write>(rows: &[ConsistencyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["metric", "mean_srcc", "mean_plcc", "winning_rate", "n_contents", "n_skipped"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
