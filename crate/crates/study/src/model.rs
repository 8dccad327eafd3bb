use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};

pub const DEFAULT_MIN_RATERS: u32 = 15;
/// In-flight assignments expire after ten minutes.
pub const DEFAULT_LEASE_MS: u64 = 10 * 60 * 1000;

/// How images are cut before serving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CropPolicy {
    #[default]
    Full,
    CenterCrop(usize),
}

impl fmt::Display for CropPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CropPolicy::Full => f.write_str("full"),
            CropPolicy::CenterCrop(n) => write!(f, "center_crop:{n}"),
        }
    }
}

impl FromStr for CropPolicy {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(CropPolicy::Full);
        }
        s.strip_prefix("center_crop:")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .map(CropPolicy::CenterCrop)
            .ok_or_else(|| StudyError::Validation(format!("crop policy must be `full` or `center_crop:N`, got `{s}`")))
    }
}

impl Serialize for CropPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CropPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub item_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentSpec {
    pub content_id: String,
    pub items: Vec<ItemSpec>,
}

fn default_min_raters() -> u32 {
    DEFAULT_MIN_RATERS
}

fn default_lease() -> u64 {
    DEFAULT_LEASE_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub study_id: String,
    pub contents: Vec<ContentSpec>,
    #[serde(default = "default_min_raters")]
    pub min_raters_per_pair: u32,
    #[serde(default)]
    pub crop_policy: CropPolicy,
    /// Base seed for pair selection and placement.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lease")]
    pub lease_ms: u64,
}

impl StudyManifest {
    /// Checks ids and that every image path exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(StudyError::Validation(m));
        if self.study_id.is_empty() || !self.study_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return bad(format!("study id `{}` must be non-empty [A-Za-z0-9_-]", self.study_id));
        }
        if self.contents.is_empty() {
            return bad("a study needs at least one content".into());
        }
        if self.min_raters_per_pair == 0 {
            return bad("min_raters_per_pair must be positive".into());
        }
        let mut seen = BTreeSet::new();
        for c in &self.contents {
            if !seen.insert(c.content_id.as_str()) {
                return bad(format!("duplicate content id `{}`", c.content_id));
            }
            if c.items.len() < 2 {
                return bad(format!("content `{}` has fewer than 2 items", c.content_id));
            }
            let mut items = BTreeSet::new();
            for it in &c.items {
                if !items.insert(it.item_id.as_str()) {
                    return bad(format!("duplicate item id `{}` in content `{}`", it.item_id, c.content_id));
                }
                if !it.path.is_file() {
                    return bad(format!("image `{}` for ({}, {}) not found", it.path.display(), c.content_id, it.item_id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One answered comparison: exactly one line of the choice log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub record_id: String,
    pub study_id: String,
    pub rater_id: String,
    pub content_id: String,
    pub left_item: String,
    pub right_item: String,
    pub chosen: Side,
    pub assignment_seed: u64,
    /// Milliseconds since the Unix epoch.
    pub issued_at: u64,
    pub answered_at: u64,
}

impl ComparisonRecord {
    pub fn winner(&self) -> &str {
        match self.chosen {
            Side::Left => &self.left_item,
            Side::Right => &self.right_item,
        }
    }

    pub fn loser(&self) -> &str {
        match self.chosen {
            Side::Left => &self.right_item,
            Side::Right => &self.left_item,
        }
    }
}

/// An issued pair; one line of the assignment log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub record_id: String,
    pub study_id: String,
    pub rater_id: String,
    pub content_id: String,
    pub left_item: String,
    pub right_item: String,
    pub assignment_seed: u64,
    pub issued_at: u64,
}

/// What a rater submits for an issued record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSubmission {
    pub record_id: String,
    pub rater_id: String,
    pub chosen: Side,
}
