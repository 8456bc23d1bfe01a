//! Length-threshold calibration and prediction, the interval baselines and
//! harmonic score aggregation.

mod aggregate;
mod baseline;
mod set;
mod threshold;

pub use aggregate::{harmonic_aggregate, harmonic_predict, harmonic_score};
pub use baseline::{
    cqr, cqr_grids, cqr_score, split_conformal, split_conformal_grids, BaselineMethod,
    BaselineResult,
};
pub use set::{
    cti_predict, cti_predict_or_shortest, set_contains, Interval, PredictionSet, Region,
};
pub use threshold::{calibrate_values, cti_calibrate, rank_index, Threshold};

use crate::error::Result;
use crate::interval::{BoundaryPolicy, ConformityScore, IntervalPartition};
use crate::quantile::QuantileGrid;
use crate::scalar::Scalar;

/// Scores of calibration responses under their partitions.
pub fn calibration_scores<T: Scalar>(
    partitions: &[IntervalPartition<T>],
    y: &[T],
    policy: BoundaryPolicy,
) -> Result<Vec<ConformityScore<T>>> {
    if partitions.len() != y.len() {
        return crate::error::invalid(format!(
            "{} partitions but {} responses",
            partitions.len(),
            y.len()
        ));
    }
    partitions
        .iter()
        .zip(y)
        .map(|(p, &y)| p.conformity_score(y, policy))
        .collect()
}

pub fn partitions<T: Scalar>(grids: Vec<QuantileGrid<T>>) -> Vec<IntervalPartition<T>> {
    grids.into_iter().map(IntervalPartition::new).collect()
}

/// Calibrated CTI over precomputed partitions.
#[derive(Debug, Clone)]
pub struct CtiCalibration<T> {
    pub threshold: Threshold<T>,
    pub scores: Vec<ConformityScore<T>>,
    pub policy: BoundaryPolicy,
}

impl<T: Scalar> CtiCalibration<T> {
    pub fn fit(
        cal: &[IntervalPartition<T>],
        cal_y: &[T],
        alpha: f64,
        policy: BoundaryPolicy,
    ) -> Result<Self> {
        let scores = calibration_scores(cal, cal_y, policy)?;
        let threshold = cti_calibrate(&scores, alpha)?;
        Ok(Self {
            threshold,
            scores,
            policy,
        })
    }

    pub fn clamp_rate(&self) -> f64 {
        let n = self.scores.len().max(1) as f64;
        self.scores.iter().filter(|s| s.boundary_clamped).count() as f64 / n
    }

    pub fn predict(&self, p: &IntervalPartition<T>, fallback_shortest: bool) -> PredictionSet<T> {
        if fallback_shortest {
            cti_predict_or_shortest(p, &self.threshold)
        } else {
            cti_predict(p, &self.threshold)
        }
    }
}
