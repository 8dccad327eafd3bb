pub mod analysis;
pub mod consistency;
pub mod corpus;
pub mod demo;
pub mod distortion;
pub mod error;
pub mod fr;
pub mod image;
pub mod metrics;
pub mod nss;
pub mod rng;
pub mod rqi;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
