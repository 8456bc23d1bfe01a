//! Harmonic-mean aggregation of length scores from two quantile models that
//! share a level set. Each model contributes the length of its own interval
//! covering `y`; the combined set keeps every `y` whose aggregated score is
//! at most the calibrated threshold.

use crate::error::{invalid, Result};
use crate::interval::{BoundaryPolicy, IntervalPartition};
use crate::scalar::Scalar;

use super::set::{within_threshold, Interval, PredictionSet};
use super::threshold::Threshold;

/// `2 / (1/a + 1/b)`, with `0` if either score is `0`.
pub fn harmonic_aggregate<T: Scalar>(a: T, b: T) -> Result<T> {
    if a.is_nan() || b.is_nan() || a < T::zero() || b < T::zero() {
        return invalid(format!("scores must be non-negative, got {a} and {b}"));
    }
    if a == T::zero() || b == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::of(2.0) / (a.recip() + b.recip()))
}

/// Aggregated score of `y` under two partitions.
pub fn harmonic_score<T: Scalar>(
    a: &IntervalPartition<T>,
    b: &IntervalPartition<T>,
    y: T,
    policy: BoundaryPolicy,
) -> Result<T> {
    let sa = a.conformity_score(y, policy)?;
    let sb = b.conformity_score(y, policy)?;
    harmonic_aggregate(sa.value, sb.value)
}

/// `{y in [min q_0, max q_K] : H(s_a(y), s_b(y)) <= t}` built on the common
/// refinement of both partitions, where both scores are constant per cell.
pub fn harmonic_predict<T: Scalar>(
    a: &IntervalPartition<T>,
    b: &IntervalPartition<T>,
    th: &Threshold<T>,
    policy: BoundaryPolicy,
) -> PredictionSet<T> {
    let mut cuts: Vec<T> = a.edges().iter().chain(b.edges()).copied().collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite edges"));
    cuts.dedup();
    let mut runs = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        // every point of (lo, hi] shares hi's covering intervals
        let score = harmonic_score(a, b, hi, policy).expect("finite, non-negative lengths");
        if within_threshold(score, th.t, lo, hi) {
            runs.push(Interval { lo, hi });
        }
    }
    PredictionSet::from_runs(runs)
}
