//! Interquantile partitions `I_k = (q_{k-1}, q_k]`, `k = 1..=K`, and the
//! length-of-covering-interval conformity score.
//!
//! Interval indices in this module are 1-based to match `I_1..I_K`.

use std::fmt;
use std::str::FromStr;

use crate::error::{data_err, Error, Result};
use crate::quantile::QuantileGrid;
use crate::scalar::Scalar;

/// What to do with a response outside `(q_0, q_K]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoundaryPolicy {
    /// Assign it to the nearest extreme interval and flag it.
    #[default]
    Clamp,
    /// Give it an infinite score.
    Infinite,
}

impl fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryPolicy::Clamp => "clamp",
            BoundaryPolicy::Infinite => "infinite",
        })
    }
}

impl FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp" => Ok(BoundaryPolicy::Clamp),
            "infinite" => Ok(BoundaryPolicy::Infinite),
            other => Err(Error::InvalidArgument(format!(
                "boundary policy must be 'clamp' or 'infinite', got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalIndex {
    Inside(usize),
    /// Outside the grid, assigned to the extreme interval under `Clamp`.
    Clamped(usize),
    OutOfRange,
}

impl IntervalIndex {
    pub fn index(self) -> Option<usize> {
        match self {
            IntervalIndex::Inside(k) | IntervalIndex::Clamped(k) => Some(k),
            IntervalIndex::OutOfRange => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformityScore<T> {
    /// Length of the covering interval, or `+inf` when out of range under
    /// the infinite policy.
    pub value: T,
    pub interval: Option<usize>,
    pub boundary_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition<T> {
    edges: QuantileGrid<T>,
    lengths: Vec<T>,
}

impl<T: Scalar> IntervalPartition<T> {
    pub fn new(grid: QuantileGrid<T>) -> Self {
        let lengths = grid.as_slice().windows(2).map(|w| w[1] - w[0]).collect();
        Self {
            edges: grid,
            lengths,
        }
    }

    pub fn k(&self) -> usize {
        self.lengths.len()
    }

    pub fn edges(&self) -> &[T] {
        self.edges.as_slice()
    }

    /// Lengths of `I_1..I_K` (0-based slice).
    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    /// Length of `I_k`, `k` in `1..=K`.
    pub fn length(&self, k: usize) -> T {
        self.lengths[k - 1]
    }

    /// `(lo, hi)` endpoints of `I_k`.
    pub fn bounds(&self, k: usize) -> (T, T) {
        let e = self.edges();
        (e[k - 1], e[k])
    }

    pub fn total_length(&self) -> T {
        self.edges.highest() - self.edges.lowest()
    }

    /// Smallest `k` with `q_{k-1} < y <= q_k`.
    pub fn interval_index(&self, y: T, policy: BoundaryPolicy) -> Result<IntervalIndex> {
        if y.is_nan() {
            return data_err("response is NaN");
        }
        let e = self.edges();
        let k = e.partition_point(|&q| q < y);
        Ok(if k == 0 {
            match policy {
                BoundaryPolicy::Clamp => IntervalIndex::Clamped(1),
                BoundaryPolicy::Infinite => IntervalIndex::OutOfRange,
            }
        } else if k > self.k() {
            match policy {
                BoundaryPolicy::Clamp => IntervalIndex::Clamped(self.k()),
                BoundaryPolicy::Infinite => IntervalIndex::OutOfRange,
            }
        } else {
            IntervalIndex::Inside(k)
        })
    }

    pub fn conformity_score(&self, y: T, policy: BoundaryPolicy) -> Result<ConformityScore<T>> {
        Ok(match self.interval_index(y, policy)? {
            IntervalIndex::Inside(k) => ConformityScore {
                value: self.length(k),
                interval: Some(k),
                boundary_clamped: false,
            },
            IntervalIndex::Clamped(k) => ConformityScore {
                value: self.length(k),
                interval: Some(k),
                boundary_clamped: true,
            },
            IntervalIndex::OutOfRange => ConformityScore {
                value: T::infinity(),
                interval: None,
                boundary_clamped: false,
            },
        })
    }
}

impl<T: Scalar> From<QuantileGrid<T>> for IntervalPartition<T> {
    fn from(grid: QuantileGrid<T>) -> Self {
        Self::new(grid)
    }
}
