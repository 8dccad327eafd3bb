//! Named metrics behind one trait, their ranking directions, and batch
//! scoring over a `content_id,model_id,image_path,reference_path` manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fr::{psnr, ssim, SsimParams};
use crate::image::{load_image, to_luma, ImageBuffer};
use crate::nss::{niqe_score, PristineModel};
use crate::rqi::{rqi_score, InferenceProtocol, RqiModel};
use crate::table::{require_headers, ScoreRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    pub fn higher_is_better(self) -> bool {
        self == Direction::HigherIsBetter
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.higher_is_better() { "higher" } else { "lower" })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" => Ok(Direction::HigherIsBetter),
            "lower" => Ok(Direction::LowerIsBetter),
            other => Err(Error::Invalid(format!("direction must be `higher` or `lower`, got `{other}`"))),
        }
    }
}

/// Metric name → ranking direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionMap(BTreeMap<String, Direction>);

impl Default for DirectionMap {
    fn default() -> Self {
        use Direction::*;
        let pairs = [
            ("psnr", HigherIsBetter),
            ("ssim", HigherIsBetter),
            ("niqe", LowerIsBetter),
            ("lpips", LowerIsBetter),
            ("dists", LowerIsBetter),
            ("pi", LowerIsBetter),
            ("rqi", HigherIsBetter),
            ("clipiqa", HigherIsBetter),
            ("maniqa", HigherIsBetter),
        ];
        Self(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl DirectionMap {
    pub fn empty() -> Self {
        Self(BTreeMap::new())
    }

    pub fn set(&mut self, metric: impl Into<String>, direction: Direction) {
        self.0.insert(metric.into(), direction);
    }

    pub fn get(&self, metric: &str) -> Result<Direction> {
        self.0
            .get(metric)
            .copied()
            .ok_or_else(|| Error::Schema(format!("metric `{metric}` has no declared direction")))
    }
}

pub trait Metric: Send + Sync {
    fn name(&self) -> &str;

    fn direction(&self) -> Direction;

    fn needs_reference(&self) -> bool;

    fn score(&self, target: &ImageBuffer, reference: Option<&ImageBuffer>) -> Result<f64>;
}

fn require_ref<'a>(name: &str, reference: Option<&'a ImageBuffer>) -> Result<&'a ImageBuffer> {
    reference.ok_or_else(|| Error::Invalid(format!("{name} needs a reference image")))
}

pub struct Psnr;

impl Metric for Psnr {
    fn name(&self) -> &str {
        "psnr"
    }

    fn direction(&self) -> Direction {
        Direction::HigherIsBetter
    }

    fn needs_reference(&self) -> bool {
        true
    }

    fn score(&self, target: &ImageBuffer, reference: Option<&ImageBuffer>) -> Result<f64> {
        psnr(&to_luma(target), &to_luma(require_ref("psnr", reference)?), 255.0)
    }
}

#[derive(Default)]
pub struct Ssim {
    pub params: SsimParams,
}

impl Metric for Ssim {
    fn name(&self) -> &str {
        "ssim"
    }

    fn direction(&self) -> Direction {
        Direction::HigherIsBetter
    }

    fn needs_reference(&self) -> bool {
        true
    }

    fn score(&self, target: &ImageBuffer, reference: Option<&ImageBuffer>) -> Result<f64> {
        Ok(ssim(&to_luma(target), &to_luma(require_ref("ssim", reference)?), &self.params)?.mean)
    }
}

pub struct Niqe {
    pub model: PristineModel,
}

impl Metric for Niqe {
    fn name(&self) -> &str {
        "niqe"
    }

    fn direction(&self) -> Direction {
        Direction::LowerIsBetter
    }

    fn needs_reference(&self) -> bool {
        false
    }

    fn score(&self, target: &ImageBuffer, _reference: Option<&ImageBuffer>) -> Result<f64> {
        niqe_score(&to_luma(target), &self.model)
    }
}

pub struct Rqi {
    pub model: RqiModel,
    pub protocol: InferenceProtocol,
}

impl Metric for Rqi {
    fn name(&self) -> &str {
        "rqi"
    }

    fn direction(&self) -> Direction {
        Direction::HigherIsBetter
    }

    fn needs_reference(&self) -> bool {
        true
    }

    fn score(&self, target: &ImageBuffer, reference: Option<&ImageBuffer>) -> Result<f64> {
        rqi_score(&self.model, target, require_ref("rqi", reference)?, &self.protocol)
    }
}

#[derive(Default)]
pub struct MetricRegistry {
    entries: Vec<Box<dyn Metric>>,
}

impl MetricRegistry {
    /// PSNR and SSIM; NIQE and RQI need fitted models and are registered by the caller.
    pub fn with_fr() -> Self {
        Self { entries: vec![Box::new(Psnr), Box::new(Ssim::default())] }
    }

    pub fn register(&mut self, m: Box<dyn Metric>) {
        self.entries.retain(|e| e.name() != m.name());
        self.entries.push(m);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Metric> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown { kind: "metric", name: name.to_string() })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn directions(&self) -> DirectionMap {
        let mut map = DirectionMap::default();
        for e in &self.entries {
            map.set(e.name(), e.direction());
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestEntry {
    pub content_id: String,
    pub model_id: String,
    pub image_path: PathBuf,
    #[serde(default)]
    pub reference_path: Option<PathBuf>,
}

/// Reads a scoring manifest; relative paths resolve against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rdr = csv::Reader::from_path(path)?;
    require_headers(&rdr.headers()?.clone(), &["content_id", "model_id", "image_path"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let mut e: ManifestEntry = row?;
        e.image_path = base.join(&e.image_path);
        e.reference_path = e.reference_path.filter(|p| !p.as_os_str().is_empty()).map(|p| base.join(p));
        out.push(e);
    }
    Ok(out)
}

/// Scores every entry under every named metric. Rows come back in manifest
/// order, metrics in the order given, regardless of thread count.
pub fn score_manifest(entries: &[ManifestEntry], metrics: &[&dyn Metric]) -> Result<Vec<ScoreRow>> {
    let per_entry: Vec<Vec<ScoreRow>> = entries
        .par_iter()
        .map(|e| {
            let target = load_image(&e.image_path)?;
            let reference = e.reference_path.as_ref().map(load_image).transpose()?;
            metrics
                .iter()
                .map(|m| {
                    if m.needs_reference() && reference.is_none() {
                        return Err(Error::Schema(format!(
                            "{} needs reference_path for ({}, {})",
                            m.name(),
                            e.content_id,
                            e.model_id
                        )));
                    }
                    Ok(ScoreRow::new(&e.content_id, &e.model_id, m.name(), m.score(&target, reference.as_ref())?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_image;
    use crate::image::save_png;

    #[test]
    fn default_directions() {
        let d = DirectionMap::default();
        assert!(d.get("psnr").unwrap().higher_is_better());
        assert!(!d.get("niqe").unwrap().higher_is_better());
        assert!(!d.get("lpips").unwrap().higher_is_better());
        assert!(d.get("maniqa").unwrap().higher_is_better());
        assert!(matches!(d.get("made-up"), Err(Error::Schema(_))));
        assert_eq!("lower".parse::<Direction>().unwrap(), Direction::LowerIsBetter);
    }

    #[test]
    fn manifest_scoring_is_ordered() {
        let dir = tempfile::tempdir().unwrap();
        let a = generate_image(64, 1).unwrap();
        let b = generate_image(64, 2).unwrap();
        save_png(&a, dir.path().join("a.png")).unwrap();
        save_png(&b, dir.path().join("b.png")).unwrap();
        std::fs::write(
            dir.path().join("m.csv"),
            "content_id,model_id,image_path,reference_path\nc1,x,a.png,a.png\nc1,y,b.png,a.png\n",
        )
        .unwrap();
        let entries = read_manifest(dir.path().join("m.csv")).unwrap();
        let reg = MetricRegistry::with_fr();
        let ms = [reg.get("psnr").unwrap(), reg.get("ssim").unwrap()];
        let rows = score_manifest(&entries, &ms).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].model_id.as_str(), rows[0].metric.as_str()), ("x", "psnr"));
        assert_eq!(rows[0].score, f64::INFINITY);
        assert_eq!(rows[1].score, 1.0);
        assert!(rows[2].score.is_finite() && rows[3].score < 1.0);
        assert!(matches!(reg.get("lpips"), Err(Error::Unknown { .. })));
    }
}
