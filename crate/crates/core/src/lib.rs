//! Conformal prediction sets built from intervals between consecutive
//! predicted conditional quantiles.
//!
//! A fitted quantile model gives, for each input, a monotone grid of `K`
//! quantiles. The grid partitions the line into intervals of roughly equal
//! conditional mass, so short intervals mark high density. Calibration picks
//! a length threshold and the prediction set is the union of all intervals
//! no longer than it.

pub mod conformal;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod interval;
pub mod oracle;
pub mod quantile;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Grid = quantile::QuantileGrid<f64>;
pub type Grid32 = quantile::QuantileGrid<f32>;
pub type Levels = quantile::QuantileLevels<f64>;
pub type Levels32 = quantile::QuantileLevels<f32>;
pub type Model = quantile::QuantileModel<f64>;
pub type Model32 = quantile::QuantileModel<f32>;
pub type Partition = interval::IntervalPartition<f64>;
pub type Partition32 = interval::IntervalPartition<f32>;
pub type Set = conformal::PredictionSet<f64>;
pub type Set32 = conformal::PredictionSet<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
