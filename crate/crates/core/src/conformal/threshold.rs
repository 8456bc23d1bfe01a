use std::cmp::Ordering;

use crate::error::{data_err, invalid, Result};
use crate::interval::ConformityScore;
use crate::scalar::Scalar;

/// `ceil((1 + n_cal)(1 - alpha))`, the rank of the calibration order
/// statistic used as threshold.
pub fn rank_index(n_cal: usize, alpha: f64) -> Result<usize> {
    if n_cal == 0 {
        return invalid("calibration set is empty");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let v = (1 + n_cal) as f64 * (1.0 - alpha);
    // absorb representation error such as 10 * 0.9 = 9.000000000000002
    let rank = (v - 1e-9 * v.max(1.0)).ceil() as usize;
    Ok(rank.max(1))
}

/// Calibrated cutoff on score values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold<T> {
    /// `+inf` when the rank exceeds the calibration size.
    pub t: T,
    pub rank: usize,
    pub n_cal: usize,
    pub alpha: f64,
}

impl<T: Scalar> Threshold<T> {
    pub fn is_saturated(&self) -> bool {
        self.rank > self.n_cal
    }
}

fn ascending<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("scores are not NaN")
}

/// `rank`-th smallest of `values` (1-based); `+inf` values sort last.
pub(crate) fn order_statistic<T: Scalar>(values: &[T], rank: usize) -> T {
    if rank > values.len() {
        return T::infinity();
    }
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(rank - 1, ascending);
    *nth
}

/// Threshold from raw score values.
pub fn calibrate_values<T: Scalar>(values: &[T], alpha: f64) -> Result<Threshold<T>> {
    if values.is_empty() {
        return invalid("no calibration scores");
    }
    if values.iter().any(|v| v.is_nan()) {
        return data_err("calibration scores contain NaN");
    }
    let rank = rank_index(values.len(), alpha)?;
    Ok(Threshold {
        t: order_statistic(values, rank),
        rank,
        n_cal: values.len(),
        alpha,
    })
}

/// Threshold `t` as the `ceil((1 + n)(1 - alpha))`-th smallest calibration score.
pub fn cti_calibrate<T: Scalar>(scores: &[ConformityScore<T>], alpha: f64) -> Result<Threshold<T>> {
    let values: Vec<T> = scores.iter().map(|s| s.value).collect();
    calibrate_values(&values, alpha)
}
