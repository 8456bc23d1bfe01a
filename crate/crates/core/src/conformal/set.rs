use crate::error::{data_err, Result};
use crate::interval::IntervalPartition;
use crate::scalar::Scalar;

use super::threshold::Threshold;

/// Anything with a membership test and a Lebesgue size.
pub trait Region<T> {
    fn contains(&self, y: T) -> bool;
    fn size(&self) -> T;
    fn n_components(&self) -> usize;
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Region<T> for Interval<T> {
    fn contains(&self, y: T) -> bool {
        self.lo <= y && y <= self.hi
    }

    fn size(&self) -> T {
        self.hi - self.lo
    }

    fn n_components(&self) -> usize {
        1
    }
}

/// Union of disjoint closed intervals sorted by position. The underlying
/// interquantile intervals are half-open; reporting them closed changes
/// membership only on a null set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet<T> {
    components: Vec<Interval<T>>,
    size: T,
}

impl<T: Scalar> PredictionSet<T> {
    pub fn empty() -> Self {
        Self {
            components: Vec::new(),
            size: T::zero(),
        }
    }

    /// Builds a set from `(lo, hi)` runs, merging touching or overlapping
    /// ones and dropping runs of zero length.
    pub fn from_runs(mut runs: Vec<Interval<T>>) -> Self {
        runs.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite bounds"));
        let mut components: Vec<Interval<T>> = Vec::with_capacity(runs.len());
        for r in runs {
            match components.last_mut() {
                Some(last) if r.lo <= last.hi => last.hi = last.hi.max(r.hi),
                _ => components.push(r),
            }
        }
        components.retain(|c| c.hi > c.lo);
        let size = components.iter().map(|c| c.hi - c.lo).sum();
        Self { components, size }
    }

    pub fn components(&self) -> &[Interval<T>] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Closed-interval membership; NaN is an error.
    pub fn try_contains(&self, y: T) -> Result<bool> {
        if y.is_nan() {
            return data_err("response is NaN");
        }
        let i = self.components.partition_point(|c| c.hi < y);
        Ok(self.components.get(i).is_some_and(|c| c.lo <= y))
    }

    /// True when every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.components.iter().all(|c| {
            other
                .components
                .iter()
                .any(|o| o.lo <= c.lo && c.hi <= o.hi)
        })
    }

    /// `"[lo;hi]|[lo;hi]"`, empty string for the empty set.
    pub fn to_compact_string(&self) -> String {
        self.components
            .iter()
            .map(|c| format!("[{};{}]", c.lo, c.hi))
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl<T: Scalar> Region<T> for PredictionSet<T> {
    fn contains(&self, y: T) -> bool {
        self.try_contains(y).unwrap_or(false)
    }

    fn size(&self) -> T {
        self.size
    }

    fn n_components(&self) -> usize {
        self.components.len()
    }
}

pub fn set_contains<T: Scalar>(set: &PredictionSet<T>, y: T) -> Result<bool> {
    set.try_contains(y)
}

/// Union of all runs of consecutive selected intervals of `p`.
pub(crate) fn union_of_selected<T: Scalar>(
    p: &IntervalPartition<T>,
    selected: impl Fn(usize) -> bool,
) -> PredictionSet<T> {
    let mut runs = Vec::new();
    let mut open: Option<Interval<T>> = None;
    for k in 1..=p.k() {
        let (lo, hi) = p.bounds(k);
        if selected(k) {
            match open.as_mut() {
                Some(run) => run.hi = hi,
                None => open = Some(Interval { lo, hi }),
            }
        } else if let Some(run) = open.take() {
            runs.push(run);
        }
    }
    runs.extend(open);
    PredictionSet::from_runs(runs)
}

/// `value <= t`, allowing for the rounding of a length computed from edges
/// at `lo` and `hi`.
pub(crate) fn within_threshold<T: Scalar>(value: T, t: T, lo: T, hi: T) -> bool {
    let slack = T::of(2.0) * T::epsilon() * lo.abs().max(hi.abs());
    value <= t + slack
}

fn short_enough<T: Scalar>(p: &IntervalPartition<T>, k: usize, t: T) -> bool {
    let (lo, hi) = p.bounds(k);
    within_threshold(p.length(k), t, lo, hi)
}

/// `C(x) = ∪ { I_k : |I_k| <= t }`. The result may be empty.
pub fn cti_predict<T: Scalar>(p: &IntervalPartition<T>, th: &Threshold<T>) -> PredictionSet<T> {
    union_of_selected(p, |k| short_enough(p, k, th.t))
}

/// Like [`cti_predict`], but an empty result is replaced by the single
/// shortest interval of positive length.
pub fn cti_predict_or_shortest<T: Scalar>(
    p: &IntervalPartition<T>,
    th: &Threshold<T>,
) -> PredictionSet<T> {
    let set = cti_predict(p, th);
    if !set.is_empty() {
        return set;
    }
    let shortest = (1..=p.k())
        .filter(|&k| p.length(k) > T::zero())
        .min_by(|&a, &b| {
            p.length(a)
                .partial_cmp(&p.length(b))
                .expect("finite lengths")
        });
    match shortest {
        Some(k) => {
            let (lo, hi) = p.bounds(k);
            PredictionSet::from_runs(vec![Interval { lo, hi }])
        }
        None => set,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::IntervalPartition;
    use crate::quantile::QuantileGrid;
    use proptest::prelude::*;

    fn part(edges: &[f64]) -> IntervalPartition<f64> {
        IntervalPartition::new(QuantileGrid::enforce_monotone(edges.to_vec()).unwrap())
    }

    fn th(t: f64) -> Threshold<f64> {
        Threshold {
            t,
            rank: 1,
            n_cal: 1,
            alpha: 0.1,
        }
    }

    #[test]
    fn predict_merges_adjacent_intervals() {
        let p = part(&[0.0, 0.5, 0.7, 1.0]);
        let s = cti_predict(&p, &th(0.3));
        assert_eq!(s.components(), &[Interval { lo: 0.5, hi: 1.0 }]);
        assert_eq!((s.size(), s.n_components()), (0.5, 1));

        let s = cti_predict(&p, &th(0.2));
        assert_eq!(s.components().len(), 1);
        assert!((s.components()[0].lo - 0.5).abs() < 1e-15);
        assert!((s.components()[0].hi - 0.7).abs() < 1e-15);
        assert!((s.size() - 0.2).abs() < 1e-15);

        let s = cti_predict(&p, &th(0.1));
        assert!(s.is_empty());
        assert_eq!(s.size(), 0.0);
    }

    #[test]
    fn non_contiguous_sets() {
        let p = part(&[0.0, 1.0, 5.0, 6.0]);
        let s = cti_predict(&p, &th(1.0));
        assert_eq!(s.n_components(), 2);
        assert_eq!(s.size(), 2.0);
        assert!(s.contains(0.5) && s.contains(5.5) && !s.contains(3.0));
    }

    #[test]
    fn infinite_threshold_keeps_everything() {
        let p = part(&[-1.0, 0.0, 3.0, 3.5]);
        let s = cti_predict(&p, &th(f64::INFINITY));
        assert_eq!(s.components(), &[Interval { lo: -1.0, hi: 3.5 }]);
    }

    #[test]
    fn zero_length_intervals_alone_are_not_components() {
        let p = part(&[0.0, 3.0, 3.0, 6.0]);
        let s = cti_predict(&p, &th(1.0));
        assert!(s.is_empty());
        // but they do not break a run
        let p = part(&[0.0, 1.0, 1.0, 2.0]);
        assert_eq!(cti_predict(&p, &th(1.0)).n_components(), 1);
    }

    #[test]
    fn fallback_substitutes_shortest_interval() {
        let p = part(&[0.0, 0.5, 0.7, 1.0]);
        let s = cti_predict_or_shortest(&p, &th(0.1));
        assert_eq!(s.n_components(), 1);
        assert!((s.size() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn contains_examples() {
        let s = PredictionSet::from_runs(vec![Interval { lo: 0.5, hi: 1.0 }]);
        assert!(set_contains(&s, 0.7).unwrap());
        assert!(!set_contains(&s, 0.4).unwrap());
        assert!(set_contains(&s, 1.0).unwrap());
        assert!(!set_contains(&PredictionSet::<f64>::empty(), 0.0).unwrap());
        assert!(set_contains(&s, f64::NAN).is_err());
    }

    fn edges_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-20.0f64..20.0, 2..40)
    }

    proptest! {
        #[test]
        fn nested_in_threshold_and_size_identity(edges in edges_strategy(), a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let p = part(&edges);
            let (t1, t2) = if a <= b { (a, b) } else { (b, a) };
            let s1 = cti_predict(&p, &th(t1));
            let s2 = cti_predict(&p, &th(t2));
            prop_assert!(s1.is_subset_of(&s2));
            let selected: f64 = p.lengths().iter().filter(|&&l| l <= t2).sum();
            prop_assert!((s2.size() - selected).abs() <= 1e-9 * selected.max(1.0));
            let comps = s2.components();
            prop_assert!(comps.windows(2).all(|w| w[0].hi < w[1].lo));
            prop_assert!(comps.iter().all(|c| c.hi >= c.lo));
        }

        #[test]
        fn midpoints_of_selected_intervals_are_members(edges in edges_strategy(), t in 0.0f64..10.0) {
            let p = part(&edges);
            let s = cti_predict(&p, &th(t));
            for k in 1..=p.k() {
                let (lo, hi) = p.bounds(k);
                if hi > lo {
                    let mid = 0.5 * (lo + hi);
                    prop_assert_eq!(s.contains(mid), p.length(k) <= t);
                }
            }
        }
    }
}
