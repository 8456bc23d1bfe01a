//! Tabular datasets, the holdout/train/calibration split protocol and
//! response standardization.
//!
//! A split first holds out `round(0.2 n)` rows for testing, then assigns
//! `round(0.7 (n - n_test))` of the remainder to training and the rest to
//! calibration. The permutation depends only on the seed.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{data_err, invalid, Error, Result};
use crate::scalar::Scalar;

pub const TEST_FRACTION: f64 = 0.2;
pub const TRAIN_FRACTION: f64 = 0.7;
pub const MIN_SPLIT_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    File { path: String, dropped_rows: usize },
    Scenario { name: String, seed: u64 },
    InMemory,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::File { path, dropped_rows } => {
                write!(f, "file:{path} (dropped {dropped_rows} rows)")
            }
            Provenance::Scenario { name, seed } => write!(f, "scenario:{name} seed={seed}"),
            Provenance::InMemory => f.write_str("in-memory"),
        }
    }
}

/// Feature matrix `x` (n × d) with responses `y`.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Array2<T>, y: Array1<T>) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names, Provenance::InMemory)
    }

    pub fn with_names(
        x: Array2<T>,
        y: Array1<T>,
        feature_names: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return invalid(format!(
                "feature rows ({}) and responses ({}) differ",
                x.nrows(),
                y.len()
            ));
        }
        if feature_names.len() != x.ncols() {
            return invalid("one feature name per column is required");
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return data_err("dataset contains non-finite values");
        }
        Ok(Self {
            x,
            y,
            feature_names,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim(),
        "" | "NA" | "na" | "N/A" | "NaN" | "nan" | "?" | "null"
    )
}

/// Reads a headed numeric CSV. Rows with a missing cell are dropped and
/// counted; any other non-numeric cell is a format error naming its column.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, response: &str) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let Some(response_col) = header.iter().position(|h| h == response) else {
        return Err(Error::Format(format!(
            "response column '{response}' not found in header [{}]",
            header.join(",")
        )));
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != response_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut responses = Vec::new();
    let mut dropped = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Format(format!(
                "row {} has {} cells, header has {}",
                row + 1,
                record.len(),
                header.len()
            )));
        }
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::Format(format!(
                    "column '{}' has non-numeric value '{cell}' at row {}",
                    header[j],
                    row + 1
                ))
            })?;
            if j == response_col {
                responses.push(T::of(value));
            } else {
                features.push(T::of(value));
            }
        }
    }
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} rows with missing values",
            path.display()
        );
    }
    if responses.is_empty() {
        return data_err(format!("{} has no complete rows", path.display()));
    }
    let n = responses.len();
    let x = Array2::from_shape_vec((n, feature_names.len()), features)
        .map_err(|e| Error::Format(e.to_string()))?;
    Dataset::with_names(
        x,
        Array1::from_vec(responses),
        feature_names,
        Provenance::File {
            path: path.display().to_string(),
            dropped_rows: dropped,
        },
    )
}

/// Disjoint train / calibration / test index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub cal: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DataSplit {
    /// Uniformly random split of `0..n` under `seed`.
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < MIN_SPLIT_ROWS {
            return invalid(format!(
                "need at least {MIN_SPLIT_ROWS} rows to split, got {n}"
            ));
        }
        let n_test = (TEST_FRACTION * n as f64).round() as usize;
        let n_train = (TRAIN_FRACTION * (n - n_test) as f64).round() as usize;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = perm[..n_test].to_vec();
        let train = perm[n_test..n_test + n_train].to_vec();
        let cal = perm[n_test + n_train..].to_vec();
        Ok(Self {
            train,
            cal,
            test,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.train.len() + self.cal.len() + self.test.len()
    }
}

/// Affine map `y -> (y - mean) / std` fitted on the non-test rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(values: impl IntoIterator<Item = T>) -> Result<Self> {
        let v: Vec<T> = values.into_iter().collect();
        if v.len() < 2 {
            return data_err("standardization needs at least two responses");
        }
        let n = T::of(v.len() as f64);
        let mean = v.iter().copied().sum::<T>() / n;
        let var = v.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / (n - T::one());
        let std = var.sqrt();
        if !(std > T::zero()) || !std.is_finite() {
            return data_err("response has zero variance on the training and calibration rows");
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, y: T) -> T {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: T) -> T {
        z * self.std + self.mean
    }
}

/// Standardizes every response with statistics from `train ∪ cal`, so test
/// responses never influence the transform.
pub fn standardize<T: Scalar>(
    ds: &Dataset<T>,
    split: &DataSplit,
) -> Result<(Dataset<T>, Standardizer<T>)> {
    let st = Standardizer::fit(split.train.iter().chain(split.cal.iter()).map(|&i| ds.y[i]))?;
    let mut out = ds.clone();
    out.y.mapv_inplace(|y| st.transform(y));
    Ok((out, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_small_file() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let ds: Dataset<f64> = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(ds.y.to_vec(), vec![3.0, 6.0, 9.0]);
        assert_eq!(ds.x.row(1).to_vec(), vec![4.0, 5.0]);
    }

    #[test]
    fn missing_cell_drops_row() {
        let f = write_tmp("a,y\n1,2\n,3\n4,5\n");
        let ds: Dataset<f64> = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.len(), 2);
        assert!(matches!(
            ds.provenance,
            Provenance::File {
                dropped_rows: 1,
                ..
            }
        ));
    }

    #[test]
    fn unknown_response_column_is_format_error() {
        let f = write_tmp("a,y\n1,2\n");
        let err = load_csv::<f64>(f.path(), "target").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn non_numeric_feature_names_the_column() {
        let f = write_tmp("colour,y\nred,2\n");
        match load_csv::<f64>(f.path(), "y").unwrap_err() {
            Error::Format(msg) => assert!(msg.contains("colour")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_sizes_follow_the_protocol() {
        let s = DataSplit::new(100, 7).unwrap();
        assert_eq!(s.test.len(), 20);
        assert_eq!(s.train.len(), 56);
        assert_eq!(s.cal.len(), 24);
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.cal)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seed_deterministic() {
        assert_eq!(
            DataSplit::new(100, 3).unwrap(),
            DataSplit::new(100, 3).unwrap()
        );
        assert_ne!(
            DataSplit::new(100, 3).unwrap().test,
            DataSplit::new(100, 4).unwrap().test
        );
    }

    #[test]
    fn split_rejects_tiny_datasets() {
        assert!(matches!(
            DataSplit::new(9, 0).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    fn dataset(y: Vec<f64>) -> Dataset<f64> {
        let n = y.len();
        Dataset::new(Array2::zeros((n, 1)), Array1::from_vec(y)).unwrap()
    }

    #[test]
    fn standardize_uses_non_test_rows() {
        let split = DataSplit {
            train: vec![0],
            cal: vec![1],
            test: vec![2],
            seed: 0,
        };
        let ds = dataset(vec![0.0, 2.0, 100.0]);
        let (out, st) = standardize(&ds, &split).unwrap();
        assert_eq!(st.mean, 1.0);
        assert!((st.std - 2f64.sqrt()).abs() < 1e-15);
        assert!((out.y[0] + out.y[1]).abs() < 1e-15);
        // test response does not move the statistics
        let ds2 = dataset(vec![0.0, 2.0, -5.0]);
        let (_, st2) = standardize(&ds2, &split).unwrap();
        assert_eq!(st, st2);
    }

    #[test]
    fn standardize_constant_response_fails() {
        let split = DataSplit::new(10, 1).unwrap();
        let err = standardize(&dataset(vec![3.0; 10]), &split).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn standardizer_round_trips() {
        let st = Standardizer::fit([1.5, -2.0, 7.25, 0.0]).unwrap();
        for y in [-3.0f64, 0.0, 1.0, 1e3] {
            assert!((st.inverse(st.transform(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn already_standardized_data_is_near_identity() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() - 0.5).collect();
        let pre = Standardizer::fit(raw.iter().copied()).unwrap();
        let z: Vec<f64> = raw.iter().map(|&v| pre.transform(v)).collect();
        let st = Standardizer::fit(z).unwrap();
        assert!(st.mean.abs() < 1e-12);
        assert!((st.std - 1.0).abs() < 1e-12);
    }
}
