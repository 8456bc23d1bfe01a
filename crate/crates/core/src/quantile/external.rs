//! Grid interchange files: `id,q0,q1,...,qK`, one row per sample.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::grid::QuantileGrid;

/// Quantile grids produced elsewhere, in file order and addressable by id.
#[derive(Debug, Clone, Default)]
pub struct ExternalGrids<T> {
    ids: Vec<String>,
    grids: Vec<QuantileGrid<T>>,
    by_id: HashMap<String, usize>,
}

impl<T: Scalar> ExternalGrids<T> {
    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&QuantileGrid<T>> {
        self.by_id.get(id).map(|&i| &self.grids[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &QuantileGrid<T>)> {
        self.ids.iter().map(String::as_str).zip(self.grids.iter())
    }

    pub fn grids(&self) -> &[QuantileGrid<T>] {
        &self.grids
    }

    fn push(&mut self, id: String, grid: QuantileGrid<T>) -> Result<()> {
        if self.by_id.insert(id.clone(), self.grids.len()).is_some() {
            return Err(Error::Format(format!("duplicate row id '{id}'")));
        }
        self.ids.push(id);
        self.grids.push(grid);
        Ok(())
    }
}

fn header(k: usize) -> Vec<String> {
    std::iter::once("id".to_owned())
        .chain((0..=k).map(|i| format!("q{i}")))
        .collect()
}

pub fn read_external_grids<T: Scalar, R: io::Read>(
    reader: R,
    k: usize,
) -> Result<ExternalGrids<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let expected = k + 2;
    let head = rdr.headers()?;
    if head.len() != expected {
        return Err(Error::Format(format!(
            "grid header has {} columns, expected {expected} for K={k}",
            head.len()
        )));
    }
    let mut out = ExternalGrids {
        ids: Vec::new(),
        grids: Vec::new(),
        by_id: HashMap::new(),
    };
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != expected {
            return Err(Error::Format(format!(
                "grid row {} has {} columns, expected {expected}",
                row + 1,
                record.len()
            )));
        }
        let raw = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| !v.is_nan())
                    .map(T::of)
                    .ok_or_else(|| {
                        Error::Data(format!(
                            "grid row {} has non-numeric cell '{cell}'",
                            row + 1
                        ))
                    })
            })
            .collect::<Result<Vec<T>>>()?;
        out.push(record[0].to_owned(), QuantileGrid::enforce_monotone(raw)?)?;
    }
    Ok(out)
}

/// Loads a grid interchange file; crossing rows are rearranged on the way in.
pub fn load_external_grids<T: Scalar>(
    path: impl AsRef<Path>,
    k: usize,
) -> Result<ExternalGrids<T>> {
    let file = std::fs::File::open(path)?;
    read_external_grids(io::BufReader::new(file), k)
}

pub fn write_grids<'a, T: Scalar, W: io::Write>(
    writer: W,
    k: usize,
    rows: impl IntoIterator<Item = (&'a str, &'a QuantileGrid<T>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(k))?;
    for (id, grid) in rows {
        if grid.k() != k {
            return Err(Error::InvalidArgument(format!(
                "grid for '{id}' has K={}, expected {k}",
                grid.k()
            )));
        }
        let mut rec = vec![id.to_owned()];
        rec.extend(grid.as_slice().iter().map(|v| v.to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}
