//! Relative quality index: an order-sensitive pairwise quality scorer.
//!
//! The model sees a target and a reference crop of the same content and
//! regresses their normalized quality difference. A positive score means
//! the target is better than the reference.

mod model;
pub mod nn;
mod pairs;
mod protocol;
mod train;

pub use model::{normalize, CropBatch, CropPair, HeadMode, RqiModel};
pub use pairs::{
    build_pairs, build_pairs_with, discrepancy_label, quality_range, Arbitrary, FrStyle, PairRegistry, PairSample,
    PairStrategy, SingleDistortion,
};
pub use protocol::{
    crop_features, evaluate, evaluate_sign_accuracy, rqi_score, score_from_features, CropFeatures, EvalReport,
    InferenceProtocol, SIGN_MARGIN,
};
pub use train::{
    gradient_check, sample_batch, split_contents, train, train_mode, Adam, EpochStats, GradientProbe, TrainConfig,
    TrainOutcome,
};
