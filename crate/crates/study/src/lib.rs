//! Live two-alternative forced-choice studies over HTTP.
//!
//! Raters ask for a pair, see it with randomized left/right placement, and
//! post their choice. Pairs with the least coverage are served first until
//! every pair has the configured number of raters. Exported win counts feed
//! Thurstone scaling.

mod error;
mod model;
mod server;
mod store;
mod study;

pub use error::{Result, StudyError};
pub use model::{
    Assignment, ChoiceSubmission, ComparisonRecord, ContentSpec, CropPolicy, ItemSpec, Side, StudyManifest,
    DEFAULT_LEASE_MS, DEFAULT_MIN_RATERS,
};
pub use server::{router, serve, SharedStore};
pub use store::{replay, Clock, StudyStore, SystemClock};
pub use study::{placement_coin, Ack, ContentCounts, NextPair, PairKey, PairStatus, Study, StudyExport, StudyStatus};

use rqi_core::stats::thurstone_scale;
use rqi_core::table::UserScales;

/// Thurstone scales for every content of an export.
pub fn export_scales(export: &StudyExport) -> Result<UserScales> {
    let mut out = UserScales::new();
    for c in &export.contents {
        let scale = thurstone_scale(&c.count_matrix()?)?;
        out.insert(c.content_id.clone(), scale.items.into_iter().zip(scale.scores).collect());
    }
    Ok(out)
}
