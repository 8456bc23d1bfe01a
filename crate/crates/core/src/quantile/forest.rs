//! Quantile regression forest.
//!
//! Trees are grown CART-style on bootstrap samples with variance-reduction
//! splits, but leaves keep the training responses instead of their mean. A
//! prediction weights every training response by its share of each leaf the
//! query lands in, averaged over trees, and reads quantiles off the weighted
//! empirical CDF: the reported τ-quantile is the smallest training response
//! whose cumulative weight reaches τ.

use ndarray::ArrayView2;
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

use super::grid::QuantileLevels;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves reach `min_leaf`.
    pub max_depth: Option<usize>,
    /// Large leaves keep the extreme quantiles from collapsing onto the
    /// few responses of a small neighbourhood.
    pub min_leaf: usize,
    /// Fraction of features tried at each split, in (0, 1].
    pub max_features: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 50,
            max_features: 1.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return invalid("tree count must be positive");
        }
        if self.min_leaf == 0 {
            return invalid("min leaf size must be at least 1");
        }
        if self.max_depth == Some(0) {
            return invalid("max depth must be positive");
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return invalid("features-per-split fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Positions into the forest's sorted response vector, with repeats for
    /// bootstrap multiplicity.
    Leaf { members: Vec<u32> },
}

#[derive(Debug, Clone)]
struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    fn leaf(&self, x: &[T]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { members } => return members,
            }
        }
    }
}

struct Grower<'a, T> {
    x: ArrayView2<'a, T>,
    /// Response of training row i.
    y: &'a [T],
    /// Position of training row i in the sorted response vector.
    rank: &'a [u32],
    cfg: &'a ForestConfig,
    n_try: usize,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

impl<'a, T: Scalar> Grower<'a, T> {
    fn grow(&self, rng: &mut ChaCha8Rng) -> Tree<T> {
        let n = self.y.len();
        let sample: Vec<usize> = if self.cfg.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        // (node slot, rows, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        nodes.push(Node::Leaf {
            members: Vec::new(),
        });
        while let Some((slot, rows, depth)) = stack.pop() {
            match self.best_split(&rows, depth, rng) {
                Some(split) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows
                        .into_iter()
                        .partition(|&i| self.x[[i, split.feature]] <= split.threshold);
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf {
                        members: Vec::new(),
                    });
                    nodes.push(Node::Leaf {
                        members: Vec::new(),
                    });
                    nodes[slot] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left,
                        right,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
                None => {
                    let mut members: Vec<u32> = rows.iter().map(|&i| self.rank[i]).collect();
                    members.sort_unstable();
                    nodes[slot] = Node::Leaf { members };
                }
            }
        }
        Tree { nodes }
    }

    fn best_split(
        &self,
        rows: &[usize],
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<BestSplit<T>> {
        let min_leaf = self.cfg.min_leaf;
        let d = self.x.ncols();
        if d == 0 || rows.len() < 2 * min_leaf || self.cfg.max_depth.is_some_and(|m| depth >= m) {
            return None;
        }
        let ys: Vec<f64> = rows.iter().map(|&i| self.y[i].as_f64()).collect();
        let total: f64 = ys.iter().sum();
        let n = rows.len() as f64;
        let sse: f64 = ys.iter().map(|v| (v - total / n).powi(2)).sum();
        if sse <= 1e-12 * n * (1.0 + (total / n).abs()).powi(2) {
            return None;
        }
        let base = total * total / n;

        let mut best: Option<BestSplit<T>> = None;
        let mut pairs: Vec<(T, f64)> = Vec::with_capacity(rows.len());
        for feature in index::sample(rng, d, self.n_try) {
            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&i| (self.x[[i, feature]], self.y[i].as_f64())),
            );
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_sum = 0.0;
            for cut in 1..pairs.len() {
                left_sum += pairs[cut - 1].1;
                if cut < min_leaf || pairs.len() - cut < min_leaf {
                    continue;
                }
                let (lo, hi) = (pairs[cut - 1].0, pairs[cut].0);
                if !(lo < hi) {
                    continue;
                }
                let nl = cut as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / T::of(2.0);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * sse)
    }
}

/// Fitted quantile regression forest.
#[derive(Debug, Clone)]
pub struct QuantileForest<T> {
    levels: QuantileLevels<T>,
    n_features: usize,
    sorted_y: Vec<T>,
    trees: Vec<Tree<T>>,
}

impl<T: Scalar> QuantileForest<T> {
    pub fn fit(train: &Dataset<T>, levels: &QuantileLevels<T>, cfg: &ForestConfig) -> Result<Self> {
        cfg.validate()?;
        if train.len() < cfg.min_leaf || train.is_empty() {
            return Err(Error::Fit(format!(
                "{} training rows cannot fill a leaf of {}",
                train.len(),
                cfg.min_leaf
            )));
        }
        if train.x.iter().chain(train.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "training data contains non-finite values".into(),
            ));
        }
        let n = train.len();
        let y = train.y.to_vec();
        let mut order: Vec<usize> = (0..n).collect();
        // Stable sort keeps equal responses in row order, so ranks are deterministic.
        order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("finite"));
        let mut rank = vec![0u32; n];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos as u32;
        }
        let sorted_y: Vec<T> = order.iter().map(|&i| y[i]).collect();

        let d = train.n_features();
        let n_try = ((cfg.max_features * d as f64).ceil() as usize).clamp(1, d.max(1));
        let grower = Grower {
            x: train.x.view(),
            y: &y,
            rank: &rank,
            cfg,
            n_try: n_try.min(d),
        };
        let mut root = ChaCha8Rng::seed_from_u64(cfg.seed);
        let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| root.next_u64()).collect();
        let trees = seeds
            .par_iter()
            .map(|&s| grower.grow(&mut ChaCha8Rng::seed_from_u64(s)))
            .collect();
        Ok(Self {
            levels: levels.clone(),
            n_features: d,
            sorted_y,
            trees,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn levels(&self) -> &QuantileLevels<T> {
        &self.levels
    }

    /// Weighted empirical quantiles at every level, ascending by construction.
    pub(crate) fn predict_row(&self, x: &[T]) -> Vec<T> {
        let mut weighted: Vec<(u32, f64)> = Vec::new();
        for tree in &self.trees {
            let members = tree.leaf(x);
            let w = 1.0 / members.len() as f64;
            weighted.extend(members.iter().map(|&p| (p, w)));
        }
        weighted.sort_unstable_by_key(|&(p, _)| p);
        let total = self.trees.len() as f64;
        let taus = self.levels.as_slice();
        let mut out = Vec::with_capacity(taus.len());
        let mut cum = 0.0;
        let mut level = 0;
        let mut i = 0;
        while i < weighted.len() && level < taus.len() {
            let pos = weighted[i].0;
            while i < weighted.len() && weighted[i].0 == pos {
                cum += weighted[i].1;
                i += 1;
            }
            while level < taus.len() && cum >= taus[level].as_f64() * total * (1.0 - 1e-12) {
                out.push(self.sorted_y[pos as usize]);
                level += 1;
            }
        }
        let last = weighted.last().map(|&(p, _)| self.sorted_y[p as usize]);
        while out.len() < taus.len() {
            out.push(last.expect("leaves are non-empty"));
        }
        out
    }
}
