//! Long-format metric score tables and their CSV forms.
//!
//! Scores: `content_id,model_id,metric,score`. GT quality:
//! `content_id,gt_quality`. User scales: `content_id,model_id,thurstone_score`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub content_id: String,
    pub model_id: String,
    pub metric: String,
    pub score: f64,
}

impl ScoreRow {
    pub fn new(content_id: impl Into<String>, model_id: impl Into<String>, metric: impl Into<String>, score: f64) -> Self {
        Self { content_id: content_id.into(), model_id: model_id.into(), metric: metric.into(), score }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricScoreTable {
    pub rows: Vec<ScoreRow>,
    /// Higher is better.
    pub gt_quality: BTreeMap<String, f64>,
}

/// Dense `[content][model]` scores of one metric, ids sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGrid {
    pub metric: String,
    pub contents: Vec<String>,
    pub models: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl MetricScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Self {
        Self { rows, gt_quality: BTreeMap::new() }
    }

    pub fn with_gt_quality(mut self, gt_quality: BTreeMap<String, f64>) -> Self {
        self.gt_quality = gt_quality;
        self
    }

    pub fn metrics(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.metric.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn models(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.model_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn contents(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.content_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// The complete content × model grid of `metric`.
    pub fn grid(&self, metric: &str) -> Result<MetricGrid> {
        let contents = self.contents();
        let models = self.models();
        let mut cells: Vec<Vec<Option<f64>>> = vec![vec![None; models.len()]; contents.len()];
        for r in self.rows.iter().filter(|r| r.metric == metric) {
            let c = contents.binary_search(&r.content_id).unwrap();
            let m = models.binary_search(&r.model_id).unwrap();
            if cells[c][m].replace(r.score).is_some() {
                return Err(Error::Schema(format!("duplicate score for ({}, {}, {metric})", r.content_id, r.model_id)));
            }
        }
        let scores = cells
            .into_iter()
            .zip(&contents)
            .map(|(row, c)| {
                row.into_iter()
                    .zip(&models)
                    .map(|(v, m)| v.ok_or_else(|| Error::Schema(format!("missing score for ({c}, {m}, {metric})"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricGrid { metric: metric.to_string(), contents, models, scores })
    }

    pub fn read_scores(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        require_headers(&rdr.headers()?.clone(), &["content_id", "model_id", "metric", "score"])?;
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
        Ok(Self::new(rows))
    }

    pub fn write_scores(&self, path: impl AsRef<Path>) -> Result<()> {
        write_score_rows(&self.rows, path)
    }
}

pub fn write_score_rows(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["content_id", "model_id", "metric", "score"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn require_headers(headers: &csv::StringRecord, required: &[&str]) -> Result<()> {
    for h in required {
        if !headers.iter().any(|x| x == *h) {
            return Err(Error::Schema(format!("missing `{h}` column")));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct GtRow {
    content_id: String,
    gt_quality: f64,
}

pub fn read_gt_quality(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    require_headers(&rdr.headers()?.clone(), &["content_id", "gt_quality"])?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: GtRow = row?;
        if out.insert(row.content_id.clone(), row.gt_quality).is_some() {
            return Err(Error::Schema(format!("duplicate gt_quality for {}", row.content_id)));
        }
    }
    Ok(out)
}

pub fn write_gt_quality(q: &BTreeMap<String, f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if q.is_empty() {
        w.write_record(["content_id", "gt_quality"])?;
    }
    for (c, v) in q {
        w.serialize(GtRow { content_id: c.clone(), gt_quality: *v })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScaleRow {
    pub content_id: String,
    pub model_id: String,
    pub thurstone_score: f64,
}

/// Per content: model id → user scale score.
pub type UserScales = BTreeMap<String, BTreeMap<String, f64>>;

pub fn read_user_scales(path: impl AsRef<Path>) -> Result<UserScales> {
    let mut rdr = csv::Reader::from_path(path)?;
    require_headers(&rdr.headers()?.clone(), &["content_id", "model_id", "thurstone_score"])?;
    let mut out: UserScales = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: UserScaleRow = row?;
        if out.entry(row.content_id.clone()).or_default().insert(row.model_id.clone(), row.thurstone_score).is_some() {
            return Err(Error::Schema(format!("duplicate user score for ({}, {})", row.content_id, row.model_id)));
        }
    }
    Ok(out)
}

pub fn write_user_scales(scales: &UserScales, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if scales.is_empty() {
        w.write_record(["content_id", "model_id", "thurstone_score"])?;
    }
    for (c, items) in scales {
        for (m, s) in items {
            w.serialize(UserScaleRow { content_id: c.clone(), model_id: m.clone(), thurstone_score: *s })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> MetricScoreTable {
        MetricScoreTable::new(vec![
            ScoreRow::new("b", "m2", "psnr", 20.0),
            ScoreRow::new("a", "m1", "psnr", 30.5),
            ScoreRow::new("a", "m2", "psnr", 25.0),
            ScoreRow::new("b", "m1", "psnr", f64::INFINITY),
        ])
    }

    #[test]
    fn grid_is_sorted_and_complete() {
        let g = table().grid("psnr").unwrap();
        assert_eq!(g.contents, vec!["a", "b"]);
        assert_eq!(g.models, vec!["m1", "m2"]);
        assert_eq!(g.scores, vec![vec![30.5, 25.0], vec![f64::INFINITY, 20.0]]);
        let mut t = table();
        t.rows.pop();
        assert!(matches!(t.grid("psnr"), Err(Error::Schema(_))));
        let mut t = table();
        t.rows.push(ScoreRow::new("a", "m1", "psnr", 1.0));
        assert!(matches!(t.grid("psnr"), Err(Error::Schema(_))));
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        table().write_scores(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("content_id,model_id,metric,score\n"));
        assert_eq!(MetricScoreTable::read_scores(&p).unwrap(), table());

        let q: BTreeMap<String, f64> = [("a".to_string(), 1.5), ("b".to_string(), -2.0)].into();
        write_gt_quality(&q, dir.path().join("q.csv")).unwrap();
        assert_eq!(read_gt_quality(dir.path().join("q.csv")).unwrap(), q);

        let mut u: UserScales = BTreeMap::new();
        u.entry("a".into()).or_default().insert("m1".into(), 0.25);
        write_user_scales(&u, dir.path().join("u.csv")).unwrap();
        assert_eq!(read_user_scales(dir.path().join("u.csv")).unwrap(), u);
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "content,model,metric,score\na,b,c,1\n").unwrap();
        assert!(matches!(MetricScoreTable::read_scores(&p), Err(Error::Schema(_))));
    }
}
