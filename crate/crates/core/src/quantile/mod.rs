//! Multi-output conditional quantile models.

mod external;
mod forest;
mod grid;
mod pinball;

use std::fmt;
use std::sync::Arc;

use ndarray::ArrayView2;
use rayon::prelude::*;

pub use external::{load_external_grids, read_external_grids, write_grids, ExternalGrids};
pub use forest::{ForestConfig, QuantileForest};
pub use grid::{QuantileGrid, QuantileLevels};
pub use pinball::{pinball_loss, PinballConfig, PinballNetwork};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    PinballJoint,
    Forest,
    External,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::PinballJoint => "pinball-joint",
            ModelKind::Forest => "forest",
            ModelKind::External => "external",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    PinballJoint(PinballConfig),
    Forest(ForestConfig),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::PinballJoint(c) => c.validate(),
            ModelConfig::Forest(c) => c.validate(),
        }
    }
}

/// Raw quantile function supplied by the caller, e.g. a known conditional
/// distribution or a model trained in another framework.
pub type QuantileFn<T> = dyn Fn(&[T], &QuantileLevels<T>) -> Vec<T> + Send + Sync;

#[derive(Clone)]
pub struct ExternalModel<T> {
    levels: QuantileLevels<T>,
    n_features: usize,
    f: Arc<QuantileFn<T>>,
}

impl<T> fmt::Debug for ExternalModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalModel")
            .field("n_features", &self.n_features)
            .finish_non_exhaustive()
    }
}

/// A fitted model predicting `K + 1` quantiles for inputs of a fixed width.
#[derive(Debug, Clone)]
pub enum QuantileModel<T> {
    PinballJoint(PinballNetwork<T>),
    Forest(QuantileForest<T>),
    External(ExternalModel<T>),
}

impl<T: Scalar> QuantileModel<T> {
    pub fn fit(train: &Dataset<T>, levels: &QuantileLevels<T>, cfg: &ModelConfig) -> Result<Self> {
        match cfg {
            ModelConfig::PinballJoint(c) => fit_pinball_joint(train, levels, c),
            ModelConfig::Forest(c) => fit_forest(train, levels, c),
        }
    }

    pub fn external<F>(levels: QuantileLevels<T>, n_features: usize, f: F) -> Self
    where
        F: Fn(&[T], &QuantileLevels<T>) -> Vec<T> + Send + Sync + 'static,
    {
        QuantileModel::External(ExternalModel {
            levels,
            n_features,
            f: Arc::new(f),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            QuantileModel::PinballJoint(_) => ModelKind::PinballJoint,
            QuantileModel::Forest(_) => ModelKind::Forest,
            QuantileModel::External(_) => ModelKind::External,
        }
    }

    pub fn levels(&self) -> &QuantileLevels<T> {
        match self {
            QuantileModel::PinballJoint(m) => m.levels(),
            QuantileModel::Forest(m) => m.levels(),
            QuantileModel::External(m) => &m.levels,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            QuantileModel::PinballJoint(m) => m.n_features(),
            QuantileModel::Forest(m) => m.n_features(),
            QuantileModel::External(m) => m.n_features,
        }
    }

    fn raw(&self, x: &[T]) -> Vec<T> {
        match self {
            QuantileModel::PinballJoint(m) => m.predict_row(x),
            QuantileModel::Forest(m) => m.predict_row(x),
            QuantileModel::External(m) => (m.f)(x, &m.levels),
        }
    }

    /// Monotone grid of `K + 1` quantiles at `x`.
    pub fn predict_grid(&self, x: &[T]) -> Result<QuantileGrid<T>> {
        if x.len() != self.n_features() {
            return invalid(format!(
                "input has {} features, model was trained on {}",
                x.len(),
                self.n_features()
            ));
        }
        let raw = self.raw(x);
        let expected = self.levels().as_slice().len();
        if raw.len() != expected {
            return invalid(format!(
                "model produced {} quantiles, expected {expected}",
                raw.len()
            ));
        }
        QuantileGrid::enforce_monotone(raw)
    }

    /// Grids for every row of `x`, in row order.
    pub fn predict_grids(&self, x: ArrayView2<T>) -> Result<Vec<QuantileGrid<T>>> {
        if x.ncols() != self.n_features() {
            return invalid(format!(
                "input has {} features, model was trained on {}",
                x.ncols(),
                self.n_features()
            ));
        }
        match self {
            QuantileModel::PinballJoint(m) => m
                .predict_raw(x)
                .outer_iter()
                .map(|row| QuantileGrid::enforce_monotone(row.to_vec()))
                .collect(),
            _ => (0..x.nrows())
                .into_par_iter()
                .map(|i| {
                    let row = x.row(i).to_vec();
                    self.predict_grid(&row)
                })
                .collect(),
        }
    }
}

pub fn fit_pinball_joint<T: Scalar>(
    train: &Dataset<T>,
    levels: &QuantileLevels<T>,
    cfg: &PinballConfig,
) -> Result<QuantileModel<T>> {
    PinballNetwork::fit(train, levels, cfg).map(QuantileModel::PinballJoint)
}

pub fn fit_forest<T: Scalar>(
    train: &Dataset<T>,
    levels: &QuantileLevels<T>,
    cfg: &ForestConfig,
) -> Result<QuantileModel<T>> {
    QuantileForest::fit(train, levels, cfg).map(QuantileModel::Forest)
}
