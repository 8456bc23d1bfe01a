use std::cmp::Ordering;

use crate::error::{data_err, invalid, Result};
use crate::scalar::Scalar;

/// Equispaced quantile levels `tau_min = levels[0] < ... < levels[K] = tau_max`.
///
/// The extremes default to 0.001 and 0.999 because most quantile learners
/// cannot estimate the 0 and 1 quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileLevels<T> {
    levels: Vec<T>,
}

impl<T: Scalar> QuantileLevels<T> {
    pub const DEFAULT_TAU_MIN: f64 = 0.001;
    pub const DEFAULT_TAU_MAX: f64 = 0.999;

    pub fn new(k: usize, tau_min: T, tau_max: T) -> Result<Self> {
        if k == 0 {
            return invalid("K must be positive");
        }
        if !(tau_min >= T::zero() && tau_min < tau_max && tau_max <= T::one()) {
            return invalid(format!(
                "quantile extremes must satisfy 0 <= tau_min < tau_max <= 1, got {tau_min} and {tau_max}"
            ));
        }
        let step = (tau_max - tau_min) / T::of(k as f64);
        let mut levels: Vec<T> = (0..=k).map(|i| tau_min + step * T::of(i as f64)).collect();
        levels[k] = tau_max;
        Ok(Self { levels })
    }

    /// `K` intervals with the default clipped extremes.
    pub fn with_k(k: usize) -> Result<Self> {
        Self::new(
            k,
            T::of(Self::DEFAULT_TAU_MIN),
            T::of(Self::DEFAULT_TAU_MAX),
        )
    }

    /// Number of interquantile intervals.
    pub fn k(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn as_slice(&self) -> &[T] {
        &self.levels
    }

    pub fn tau_min(&self) -> T {
        self.levels[0]
    }

    pub fn tau_max(&self) -> T {
        self.levels[self.k()]
    }

    /// Probability mass nominally carried by each interquantile interval.
    pub fn spacing(&self) -> T {
        (self.tau_max() - self.tau_min()) / T::of(self.k() as f64)
    }

    /// Index of the level closest to `tau` and the absolute distance to it.
    /// Ties go to the lower index.
    pub fn nearest(&self, tau: T) -> (usize, T) {
        let mut best = (0, (self.levels[0] - tau).abs());
        for (i, &l) in self.levels.iter().enumerate().skip(1) {
            let d = (l - tau).abs();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Non-crossing vector of `K + 1` quantile estimates for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid<T> {
    q: Vec<T>,
}

impl<T: Scalar> QuantileGrid<T> {
    /// Monotone rearrangement of raw model output. Sorting is idempotent and
    /// keeps the set of values, so an already monotone vector is untouched.
    pub fn enforce_monotone(mut raw: Vec<T>) -> Result<Self> {
        if raw.len() < 2 {
            return invalid(format!(
                "a quantile grid needs at least 2 values, got {}",
                raw.len()
            ));
        }
        if let Some(i) = raw.iter().position(|v| v.is_nan()) {
            return data_err(format!("quantile grid entry {i} is NaN"));
        }
        raw.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        Ok(Self { q: raw })
    }

    /// Number of interquantile intervals.
    pub fn k(&self) -> usize {
        self.q.len() - 1
    }

    pub fn as_slice(&self) -> &[T] {
        &self.q
    }

    pub fn lowest(&self) -> T {
        self.q[0]
    }

    pub fn highest(&self) -> T {
        self.q[self.k()]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn levels_are_equispaced_between_clipped_extremes() {
        let levels = QuantileLevels::<f64>::with_k(4).unwrap();
        let l = levels.as_slice();
        assert_eq!(l.len(), 5);
        assert_eq!(l[0], 0.001);
        assert_eq!(l[4], 0.999);
        for w in l.windows(2) {
            assert!((w[1] - w[0] - 0.2495).abs() < 1e-12);
        }
        assert!((levels.spacing() - 0.2495).abs() < 1e-15);
    }

    #[test]
    fn levels_reject_bad_arguments() {
        assert!(QuantileLevels::<f64>::with_k(0).is_err());
        assert!(QuantileLevels::<f64>::new(3, 0.5, 0.5).is_err());
        assert!(QuantileLevels::<f64>::new(3, -0.1, 0.9).is_err());
    }

    #[test]
    fn nearest_level_and_snap_distance() {
        let levels = QuantileLevels::<f64>::with_k(40).unwrap();
        let (i, d) = levels.nearest(0.05);
        assert_eq!(i, 2);
        assert!((d - (0.001 + 2.0 * 0.02495 - 0.05)).abs() < 1e-12);
        assert_eq!(levels.nearest(0.5).0, 20);
    }

    #[test]
    fn enforce_monotone_examples() {
        let g = QuantileGrid::enforce_monotone(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 2.0, 3.0]);
        let g = QuantileGrid::enforce_monotone(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 2.0, 3.0]);
        let g = QuantileGrid::enforce_monotone(vec![2.0, 2.0, 2.0]).unwrap();
        assert_eq!(g.as_slice(), &[2.0, 2.0, 2.0]);
        let g = QuantileGrid::enforce_monotone(vec![0.0, 0.3, 0.2, 1.0]).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.2, 0.3, 1.0]);
    }

    #[test]
    fn enforce_monotone_rejects_nan() {
        let err = QuantileGrid::enforce_monotone(vec![0.0, f64::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, crate::Error::Data(_)));
    }

    proptest! {
        #[test]
        fn delivered_grids_are_monotone_and_idempotent(raw in prop::collection::vec(-1e6f64..1e6, 2..60)) {
            let g = QuantileGrid::enforce_monotone(raw.clone()).unwrap();
            prop_assert!(g.as_slice().windows(2).all(|w| w[0] <= w[1]));
            let again = QuantileGrid::enforce_monotone(g.as_slice().to_vec()).unwrap();
            prop_assert_eq!(&again, &g);
            let mut sorted = raw;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(g.as_slice(), &sorted[..]);
        }
    }
}
