//! Interval-valued baselines: split conformal with absolute residuals around
//! the median, and conformalized quantile regression (CQR).

use std::fmt;

use crate::data::Dataset;
use crate::error::{data_err, invalid, Result};
use crate::quantile::{QuantileGrid, QuantileLevels, QuantileModel};
use crate::scalar::Scalar;

use super::set::Interval;
use super::threshold::{calibrate_values, Threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Split,
    Cqr,
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineMethod::Split => "split",
            BaselineMethod::Cqr => "cqr",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult<T> {
    pub method: BaselineMethod,
    pub intervals: Vec<Interval<T>>,
    /// Calibrated score quantile `Q`.
    pub q: T,
    pub threshold: Threshold<T>,
    /// Grid levels used: the median for split, `(lo, hi)` for CQR.
    pub levels_used: (usize, usize),
    /// Largest distance between a requested and a snapped level.
    pub snap_distance: T,
}

fn check_lengths<T>(grids: &[QuantileGrid<T>], y: &[T]) -> Result<()> {
    if grids.len() != y.len() {
        return invalid(format!("{} grids but {} responses", grids.len(), y.len()));
    }
    Ok(())
}

/// Split conformal on precomputed grids: `f(x)` is the grid value at the
/// level nearest 0.5, the score is `|y - f(x)|`, intervals are `f(x) ± Q`.
pub fn split_conformal_grids<T: Scalar>(
    levels: &QuantileLevels<T>,
    cal_grids: &[QuantileGrid<T>],
    cal_y: &[T],
    test_grids: &[QuantileGrid<T>],
    alpha: f64,
) -> Result<BaselineResult<T>> {
    check_lengths(cal_grids, cal_y)?;
    if cal_y.iter().any(|y| y.is_nan()) {
        return data_err("calibration responses contain NaN");
    }
    let (mid, snap) = levels.nearest(T::of(0.5));
    let scores: Vec<T> = cal_grids
        .iter()
        .zip(cal_y)
        .map(|(g, &y)| (y - g.as_slice()[mid]).abs())
        .collect();
    let threshold = calibrate_values(&scores, alpha)?;
    let q = threshold.t;
    let intervals = test_grids
        .iter()
        .map(|g| {
            let f = g.as_slice()[mid];
            Interval {
                lo: f - q,
                hi: f + q,
            }
        })
        .collect();
    Ok(BaselineResult {
        method: BaselineMethod::Split,
        intervals,
        q,
        threshold,
        levels_used: (mid, mid),
        snap_distance: snap,
    })
}

/// CQR score `max(q_lo - y, y - q_hi)`; negative inside the band.
pub fn cqr_score<T: Scalar>(lo: T, hi: T, y: T) -> T {
    (lo - y).max(y - hi)
}

/// CQR on precomputed grids, using the grid levels nearest `alpha/2` and
/// `1 - alpha/2`. Intervals are `[q_lo - Q, q_hi + Q]`; a negative `Q` that
/// would invert an interval collapses it to its midpoint.
pub fn cqr_grids<T: Scalar>(
    levels: &QuantileLevels<T>,
    cal_grids: &[QuantileGrid<T>],
    cal_y: &[T],
    test_grids: &[QuantileGrid<T>],
    alpha: f64,
) -> Result<BaselineResult<T>> {
    check_lengths(cal_grids, cal_y)?;
    if cal_y.iter().any(|y| y.is_nan()) {
        return data_err("calibration responses contain NaN");
    }
    let (lo_i, lo_snap) = levels.nearest(T::of(alpha / 2.0));
    let (hi_i, hi_snap) = levels.nearest(T::of(1.0 - alpha / 2.0));
    if lo_i >= hi_i {
        return invalid(format!(
            "quantile grid too coarse: alpha/2 and 1-alpha/2 snap to levels {lo_i} and {hi_i}"
        ));
    }
    let scores: Vec<T> = cal_grids
        .iter()
        .zip(cal_y)
        .map(|(g, &y)| cqr_score(g.as_slice()[lo_i], g.as_slice()[hi_i], y))
        .collect();
    let threshold = calibrate_values(&scores, alpha)?;
    let q = threshold.t;
    let intervals = test_grids
        .iter()
        .map(|g| {
            let (lo, hi) = (g.as_slice()[lo_i] - q, g.as_slice()[hi_i] + q);
            if lo <= hi {
                Interval { lo, hi }
            } else {
                let mid = (lo + hi) / T::of(2.0);
                Interval { lo: mid, hi: mid }
            }
        })
        .collect();
    Ok(BaselineResult {
        method: BaselineMethod::Cqr,
        intervals,
        q,
        threshold,
        levels_used: (lo_i, hi_i),
        snap_distance: lo_snap.max(hi_snap),
    })
}

pub fn split_conformal<T: Scalar>(
    model: &QuantileModel<T>,
    cal: &Dataset<T>,
    test: &Dataset<T>,
    alpha: f64,
) -> Result<BaselineResult<T>> {
    let cal_grids = model.predict_grids(cal.x.view())?;
    let test_grids = model.predict_grids(test.x.view())?;
    split_conformal_grids(
        model.levels(),
        &cal_grids,
        cal.y.as_slice().expect("contiguous"),
        &test_grids,
        alpha,
    )
}

pub fn cqr<T: Scalar>(
    model: &QuantileModel<T>,
    cal: &Dataset<T>,
    test: &Dataset<T>,
    alpha: f64,
) -> Result<BaselineResult<T>> {
    let cal_grids = model.predict_grids(cal.x.view())?;
    let test_grids = model.predict_grids(test.x.view())?;
    cqr_grids(
        model.levels(),
        &cal_grids,
        cal.y.as_slice().expect("contiguous"),
        &test_grids,
        alpha,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(v: &[f64]) -> QuantileGrid<f64> {
        QuantileGrid::enforce_monotone(v.to_vec()).unwrap()
    }

    /// K = 2 levels (0.001, 0.5, 0.999): median in the middle column.
    fn three_level() -> QuantileLevels<f64> {
        QuantileLevels::with_k(2).unwrap()
    }

    #[test]
    fn split_perfect_predictor_gives_points() {
        let levels = three_level();
        let cal: Vec<_> = (0..5)
            .map(|i| grid(&[i as f64 - 1.0, i as f64, i as f64 + 1.0]))
            .collect();
        let y: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let r = split_conformal_grids(&levels, &cal, &y, &cal[..2], 0.2).unwrap();
        assert_eq!(r.q, 0.0);
        assert!(r.intervals.iter().all(|iv| iv.lo == iv.hi));
    }

    #[test]
    fn split_residual_rank() {
        let levels = three_level();
        let cal = vec![grid(&[-1.0, 0.0, 1.0]); 3];
        let y = [1.0, -2.0, 3.0];
        let r = split_conformal_grids(&levels, &cal, &y, &cal[..1], 0.5).unwrap();
        assert_eq!(r.threshold.rank, 2);
        assert_eq!(r.q, 2.0);
        assert_eq!(r.intervals[0], Interval { lo: -2.0, hi: 2.0 });
    }

    #[test]
    fn cqr_sign_convention() {
        // band [0, 1], y = 0.2 lies 0.2 above lo and 0.8 below hi
        assert!((cqr_score(0.0f64, 1.0, 0.2) + 0.2).abs() < 1e-15);
        // margins 0.2 / 0.3 → max(-0.2, -0.3) = -0.2
        assert!((cqr_score(0.0f64, 0.5, 0.2) + 0.2).abs() < 1e-15);
        assert!((cqr_score(0.0f64, 1.0, 1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cqr_responses_on_upper_band_give_zero_q() {
        let levels = QuantileLevels::<f64>::with_k(40).unwrap();
        let raw: Vec<f64> = levels.as_slice().to_vec();
        let cal = vec![grid(&raw); 20];
        let (_, hi_i) = (levels.nearest(0.05).0, levels.nearest(0.95).0);
        let y = vec![raw[hi_i]; 20];
        let r = cqr_grids(&levels, &cal, &y, &cal[..1], 0.1).unwrap();
        assert_eq!(r.q, 0.0);
        assert_eq!(
            r.intervals[0],
            Interval {
                lo: raw[r.levels_used.0],
                hi: raw[hi_i]
            }
        );
        assert!(r.snap_distance < 0.02);
    }

    #[test]
    fn cqr_rejects_coarse_grid() {
        // both alpha/2 and 1 - alpha/2 snap to the median level
        let levels = three_level();
        let cal = vec![grid(&[0.0, 0.5, 1.0])];
        assert!(cqr_grids(&levels, &cal, &[0.5], &cal, 0.9).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let levels = three_level();
        let cal = vec![grid(&[0.0, 1.0, 2.0])];
        assert!(split_conformal_grids(&levels, &cal, &[1.0, 2.0], &cal, 0.1).is_err());
    }
}
