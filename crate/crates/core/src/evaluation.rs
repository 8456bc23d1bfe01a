//! Coverage and size metrics, repetition summaries and interval-length
//! histograms, plus their CSV encodings.

use std::io;

use crate::conformal::Region;
use crate::error::{data_err, invalid, Result};
use crate::interval::{BoundaryPolicy, IntervalPartition};
use crate::scalar::Scalar;

/// Fraction of responses contained in their set.
pub fn coverage<T: Scalar, R: Region<T>>(sets: &[R], y: &[T]) -> Result<f64> {
    if sets.len() != y.len() {
        return invalid(format!("{} sets but {} responses", sets.len(), y.len()));
    }
    if sets.is_empty() {
        return invalid("no test samples");
    }
    let hits = sets.iter().zip(y).filter(|(s, &y)| s.contains(y)).count();
    Ok(hits as f64 / sets.len() as f64)
}

pub fn mean_size<T: Scalar, R: Region<T>>(sets: &[R]) -> Result<f64> {
    if sets.is_empty() {
        return invalid("no prediction sets");
    }
    Ok(sets.iter().map(|s| s.size().as_f64()).sum::<f64>() / sets.len() as f64)
}

pub fn mean_components<T: Scalar, R: Region<T>>(sets: &[R]) -> Result<f64> {
    if sets.is_empty() {
        return invalid("no prediction sets");
    }
    Ok(sets.iter().map(|s| s.n_components() as f64).sum::<f64>() / sets.len() as f64)
}

/// Histograms of the lengths of the intervals containing the responses
/// versus the lengths of all intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthHistogram {
    pub edges: Vec<f64>,
    pub count_response: Vec<usize>,
    pub count_all: Vec<usize>,
    /// `mean(response lengths) - mean(all lengths)`.
    pub mean_difference: f64,
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    if width <= 0.0 {
        return 0;
    }
    (((v - lo) / width) as usize).min(bins - 1)
}

pub fn length_histograms<T: Scalar>(
    partitions: &[IntervalPartition<T>],
    y: &[T],
    bins: usize,
    policy: BoundaryPolicy,
) -> Result<LengthHistogram> {
    if bins < 2 {
        return invalid("a histogram needs at least 2 bins");
    }
    if partitions.len() != y.len() {
        return invalid(format!(
            "{} partitions but {} responses",
            partitions.len(),
            y.len()
        ));
    }
    let mut response = Vec::with_capacity(y.len());
    for (p, &yi) in partitions.iter().zip(y) {
        let s = p.conformity_score(yi, policy)?;
        if s.interval.is_some() {
            response.push(s.value.as_f64());
        }
    }
    if response.is_empty() {
        return data_err("no response falls inside its quantile grid");
    }
    let all: Vec<f64> = partitions
        .iter()
        .flat_map(|p| p.lengths().iter().map(|l| l.as_f64()))
        .collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut count_response = vec![0; bins];
    let mut count_all = vec![0; bins];
    for &v in &response {
        count_response[bin_of(v, lo, width, bins)] += 1;
    }
    for &v in &all {
        count_all[bin_of(v, lo, width, bins)] += 1;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(LengthHistogram {
        edges,
        count_response,
        count_all,
        mean_difference: mean(&response) - mean(&all),
    })
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }

    /// `"0.899 (0.007)"`.
    pub fn display(&self) -> String {
        format!("{:.3} ({:.3})", self.mean, self.std)
    }
}

/// Per-repetition metrics of one method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub coverage: Vec<f64>,
    pub size: Vec<f64>,
    /// Mean number of components; only set-valued methods report it.
    pub n_components: Vec<f64>,
    pub clamp_rate: Vec<f64>,
}

impl MethodReport {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            ..Default::default()
        }
    }

    pub fn n_reps(&self) -> usize {
        self.coverage.len()
    }

    /// `(metric, summary)` rows in a fixed order; empty metrics are skipped.
    pub fn summaries(&self) -> Vec<(&'static str, Summary)> {
        [
            ("coverage", &self.coverage),
            ("size", &self.size),
            ("n_components", &self.n_components),
            ("clamp_rate", &self.clamp_rate),
        ]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(name, v)| (name, Summary::of(v)))
        .collect()
    }
}

pub const REPORT_HEADER: [&str; 6] = ["dataset", "method", "metric", "mean", "std", "n_reps"];
pub const HISTOGRAM_HEADER: [&str; 4] = ["bin_lo", "bin_hi", "count_response", "count_all"];

pub fn write_report<W: io::Write>(
    writer: W,
    dataset: &str,
    reports: &[MethodReport],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        for (metric, s) in r.summaries() {
            w.write_record([
                dataset.to_owned(),
                r.method.clone(),
                metric.to_owned(),
                format!("{:.6}", s.mean),
                format!("{:.6}", s.std),
                s.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: io::Write>(writer: W, h: &LengthHistogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HISTOGRAM_HEADER)?;
    for (i, (cr, ca)) in h.count_response.iter().zip(&h.count_all).enumerate() {
        w.write_record([
            format!("{:.6}", h.edges[i]),
            format!("{:.6}", h.edges[i + 1]),
            cr.to_string(),
            ca.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{Interval, PredictionSet};
    use crate::quantile::QuantileGrid;
    use proptest::prelude::*;

    fn set(lo: f64, hi: f64) -> PredictionSet<f64> {
        PredictionSet::from_runs(vec![Interval { lo, hi }])
    }

    #[test]
    fn coverage_examples() {
        let y = [0.0, 1.0, 2.0];
        let whole = vec![set(0.0, 2.0); 3];
        assert_eq!(coverage(&whole, &y).unwrap(), 1.0);
        let empty = vec![PredictionSet::<f64>::empty(); 3];
        assert_eq!(coverage(&empty, &y).unwrap(), 0.0);

        let sets: Vec<_> = (0..10).map(|_| set(0.0, 1.0)).collect();
        let y: Vec<f64> = (0..10).map(|i| if i == 3 { 5.0 } else { 0.5 }).collect();
        assert!((coverage(&sets, &y).unwrap() - 0.9).abs() < 1e-15);
        assert!(coverage(&sets, &y[..3]).is_err());
    }

    #[test]
    fn coverage_of_plain_intervals() {
        let iv = [Interval { lo: 0.0, hi: 1.0 }, Interval { lo: 0.0, hi: 1.0 }];
        assert_eq!(coverage(&iv, &[0.5, 2.0]).unwrap(), 0.5);
        assert_eq!(mean_size(&iv).unwrap(), 1.0);
    }

    #[test]
    fn mean_size_examples() {
        assert_eq!(
            mean_size(&[set(0.0, 1.0), set(1.0, 2.0), set(5.0, 6.0)]).unwrap(),
            1.0
        );
        assert_eq!(mean_size(&[set(0.0, 0.0), set(0.0, 2.0)]).unwrap(), 1.0);
        assert_eq!(mean_size(&[PredictionSet::<f64>::empty()]).unwrap(), 0.0);
        assert!(mean_size::<f64, PredictionSet<f64>>(&[]).is_err());
    }

    fn part(edges: &[f64]) -> IntervalPartition<f64> {
        IntervalPartition::new(QuantileGrid::enforce_monotone(edges.to_vec()).unwrap())
    }

    #[test]
    fn histogram_identical_lengths() {
        let parts = vec![part(&[0.0, 1.0, 2.0]); 4];
        let h = length_histograms(&parts, &[0.5, 1.5, 0.2, 1.9], 5, BoundaryPolicy::Clamp).unwrap();
        assert_eq!(h.mean_difference, 0.0);
        assert_eq!(h.count_response.iter().sum::<usize>(), 4);
        assert_eq!(h.count_all.iter().sum::<usize>(), 8);
    }

    #[test]
    fn histogram_responses_in_short_intervals() {
        let parts = vec![part(&[0.0, 1.0, 4.0]); 3];
        let h = length_histograms(&parts, &[0.5, 0.1, 0.9], 2, BoundaryPolicy::Clamp).unwrap();
        assert_eq!(h.mean_difference, -1.0);
        assert_eq!(h.count_response, vec![3, 0]);
        assert_eq!(h.count_all, vec![3, 3]);
        assert_eq!(h.edges, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn histogram_errors() {
        let parts = vec![part(&[0.0, 1.0])];
        assert!(length_histograms(&parts, &[0.5], 1, BoundaryPolicy::Clamp).is_err());
        assert!(matches!(
            length_histograms(&parts, &[5.0], 2, BoundaryPolicy::Infinite).unwrap_err(),
            crate::Error::Data(_)
        ));
    }

    #[test]
    fn summary_examples() {
        assert_eq!(Summary::of(&[0.9, 0.9]).display(), "0.900 (0.000)");
        let s = Summary::of(&[0.7]);
        assert_eq!((s.mean, s.std), (0.7, 0.0));
        let s = Summary::of(&[0.8, 1.0]);
        assert!((s.mean - 0.9).abs() < 1e-15);
        assert!((s.std - 0.1414).abs() < 1e-4);
    }

    #[test]
    fn report_csv_layout() {
        let mut r = MethodReport::new("cti-forest");
        r.coverage = vec![0.9, 0.92];
        r.size = vec![1.0, 1.2];
        let mut buf = Vec::new();
        write_report(&mut buf, "bike", &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "dataset,method,metric,mean,std,n_reps");
        assert_eq!(lines[1], "bike,cti-forest,coverage,0.910000,0.014142,2");
        assert_eq!(lines.len(), 3);
    }

    proptest! {
        #[test]
        fn metrics_ignore_test_order(
            sets in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0, -1.0f64..11.0), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rows: Vec<_> = sets.iter().map(|&(a, w, y)| (set(a, a + w), y)).collect();
            let cov = coverage(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>(), &rows.iter().map(|r| r.1).collect::<Vec<_>>()).unwrap();
            let size = mean_size(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
            rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let cov2 = coverage(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>(), &rows.iter().map(|r| r.1).collect::<Vec<_>>()).unwrap();
            let size2 = mean_size(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(cov, cov2);
            prop_assert!((size - size2).abs() < 1e-12);
        }
    }
}
