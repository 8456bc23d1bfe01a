//! Check (pinball) loss and a small multilayer network that fits all
//! quantile levels jointly by minimizing the summed check loss.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

use super::grid::QuantileLevels;

/// `tau * r` for positive residuals, `-(1 - tau) * r` otherwise.
pub fn pinball_loss<T: Scalar>(residual: T, tau: T) -> Result<T> {
    if !(tau > T::zero() && tau < T::one()) {
        return invalid(format!("pinball level must lie in (0, 1), got {tau}"));
    }
    Ok(if residual > T::zero() {
        tau * residual
    } else {
        -(T::one() - tau) * residual
    })
}

/// Derivative of the check loss with respect to the prediction, with the
/// zero subgradient at a zero residual.
fn pinball_grad<T: Scalar>(residual: T, tau: T) -> T {
    if residual > T::zero() {
        -tau
    } else if residual < T::zero() {
        T::one() - tau
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinballConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for PinballConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: None,
            seed: 0,
        }
    }
}

impl PinballConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return invalid("hidden layer widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning rate must be positive");
        }
        if self.epochs == 0 {
            return invalid("epochs must be positive");
        }
        if self.batch_size == Some(0) {
            return invalid("batch size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Dense<T> {
    w: Array2<T>,
    b: Array1<T>,
}

#[derive(Debug, Clone)]
struct AdamState<T> {
    m_w: Array2<T>,
    v_w: Array2<T>,
    m_b: Array1<T>,
    v_b: Array1<T>,
}

impl<T: Scalar> AdamState<T> {
    fn zeros_like(layer: &Dense<T>) -> Self {
        Self {
            m_w: Array2::zeros(layer.w.raw_dim()),
            v_w: Array2::zeros(layer.w.raw_dim()),
            m_b: Array1::zeros(layer.b.raw_dim()),
            v_b: Array1::zeros(layer.b.raw_dim()),
        }
    }
}

struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn update(&self, layer: &mut Dense<T>, st: &mut AdamState<T>, gw: &Array2<T>, gb: &Array1<T>) {
        let c1 = T::one() - self.beta1.powi(self.step);
        let c2 = T::one() - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let one = T::one();
        Zip::from(&mut layer.w)
            .and(&mut st.m_w)
            .and(&mut st.v_w)
            .and(gw)
            .for_each(|w, m, v, &g| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *w = *w - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        Zip::from(&mut layer.b)
            .and(&mut st.m_b)
            .and(&mut st.v_b)
            .and(gb)
            .for_each(|b, m, v, &g| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *b = *b - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
}

/// ReLU network with one output per quantile level. Inputs and responses are
/// standardized internally; outputs are returned in response units and may
/// cross (callers rearrange them).
#[derive(Debug, Clone)]
pub struct PinballNetwork<T> {
    levels: QuantileLevels<T>,
    x_mean: Array1<T>,
    x_scale: Array1<T>,
    y_mean: T,
    y_scale: T,
    layers: Vec<Dense<T>>,
}

fn column_stats<T: Scalar>(x: ArrayView2<T>) -> (Array1<T>, Array1<T>) {
    let n = T::of(x.nrows() as f64);
    let mean = x.sum_axis(Axis(0)) / n;
    let mut scale = Array1::zeros(x.ncols());
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        let var = col
            .iter()
            .map(|&v| (v - mean[j]) * (v - mean[j]))
            .sum::<T>()
            / n;
        let sd = var.sqrt();
        scale[j] = if sd > T::zero() { sd } else { T::one() };
    }
    (mean, scale)
}

/// Empirical quantile with linear interpolation between order statistics.
fn empirical_quantile<T: Scalar>(sorted: &[T], tau: T) -> T {
    let pos = tau * T::of((sorted.len() - 1) as f64);
    let lo = pos.floor().to_usize().unwrap_or(0).min(sorted.len() - 1);
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - T::of(lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl<T: Scalar> PinballNetwork<T> {
    pub fn fit(
        train: &Dataset<T>,
        levels: &QuantileLevels<T>,
        cfg: &PinballConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return invalid("training set is empty");
        }
        if train.x.iter().chain(train.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "training data contains non-finite values".into(),
            ));
        }
        let n = train.len();
        let d = train.n_features();
        let (x_mean, x_scale) = column_stats(train.x.view());
        let y_mean = train.y.sum() / T::of(n as f64);
        let y_var = train
            .y
            .iter()
            .map(|&v| (v - y_mean) * (v - y_mean))
            .sum::<T>()
            / T::of(n as f64);
        let y_scale = if y_var > T::zero() {
            y_var.sqrt()
        } else {
            T::one()
        };

        let xs = (&train.x - &x_mean) / &x_scale;
        let ys = train.y.mapv(|v| (v - y_mean) / y_scale);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut layers = Vec::with_capacity(cfg.hidden.len() + 1);
        let mut fan_in = d;
        for &width in &cfg.hidden {
            let bound = if fan_in == 0 {
                0.0
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let w = Array2::from_shape_fn((fan_in, width), |_| {
                T::of(rng.random_range(-1.0..=1.0) * bound)
            });
            layers.push(Dense {
                w,
                b: Array1::zeros(width),
            });
            fan_in = width;
        }
        // Zero output weights and biases at the marginal quantiles: training
        // starts from the unconditional solution.
        let mut sorted = ys.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let b_out = levels
            .as_slice()
            .iter()
            .map(|&tau| empirical_quantile(&sorted, tau))
            .collect::<Array1<T>>();
        layers.push(Dense {
            w: Array2::zeros((fan_in, levels.as_slice().len())),
            b: b_out,
        });

        let mut net = Self {
            levels: levels.clone(),
            x_mean,
            x_scale,
            y_mean,
            y_scale,
            layers,
        };
        net.train(&xs, &ys, cfg, &mut rng);
        Ok(net)
    }

    fn train(&mut self, xs: &Array2<T>, ys: &Array1<T>, cfg: &PinballConfig, rng: &mut ChaCha8Rng) {
        let n = xs.nrows();
        let batch = cfg.batch_size.unwrap_or(n).min(n);
        let mut adam = Adam {
            lr: T::of(cfg.learning_rate),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
        };
        let mut states: Vec<AdamState<T>> = self.layers.iter().map(AdamState::zeros_like).collect();
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.epochs {
            // cosine decay to zero over the run
            let progress = epoch as f64 / cfg.epochs as f64;
            adam.lr =
                T::of(cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
            if batch < n {
                order.shuffle(rng);
            }
            for chunk in order.chunks(batch) {
                let (xb, yb) = if batch < n {
                    (xs.select(Axis(0), chunk), ys.select(Axis(0), chunk))
                } else {
                    (xs.clone(), ys.clone())
                };
                let grads = self.backward(&xb, &yb);
                adam.step += 1;
                for ((layer, st), (gw, gb)) in self
                    .layers
                    .iter_mut()
                    .zip(states.iter_mut())
                    .zip(grads.iter())
                {
                    adam.update(layer, st, gw, gb);
                }
            }
        }
    }

    /// Gradients of the mean (over rows) summed (over levels) check loss.
    fn backward(&self, xb: &Array2<T>, yb: &Array1<T>) -> Vec<(Array2<T>, Array1<T>)> {
        let mut activations = vec![xb.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = activations[i].dot(&layer.w) + &layer.b;
            let a = if i + 1 < self.layers.len() {
                z.mapv(|v| v.max(T::zero()))
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(a);
        }
        let out = activations.last().expect("output layer");
        let inv_n = T::one() / T::of(xb.nrows() as f64);
        let taus = self.levels.as_slice();
        let mut delta = Array2::zeros(out.raw_dim());
        Zip::indexed(&mut delta).and(out).for_each(|(i, k), g, &q| {
            *g = pinball_grad(yb[i] - q, taus[k]) * inv_n;
        });

        let mut grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let gw = activations[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].w.t());
                Zip::from(&mut back).and(&pre[i - 1]).for_each(|b, &z| {
                    if z <= T::zero() {
                        *b = T::zero();
                    }
                });
                delta = back;
            }
            grads[i] = (gw, gb);
        }
        grads
    }

    pub fn n_features(&self) -> usize {
        self.x_mean.len()
    }

    pub fn levels(&self) -> &QuantileLevels<T> {
        &self.levels
    }

    /// Raw (possibly crossing) outputs in response units, one row per input.
    pub fn predict_raw(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut a = (&x - &self.x_mean) / &self.x_scale;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w) + &layer.b;
            a = if i + 1 < self.layers.len() {
                z.mapv(|v| v.max(T::zero()))
            } else {
                z
            };
        }
        a.mapv(|v| v * self.y_scale + self.y_mean)
    }

    /// Mean summed check loss on a dataset, in response units.
    pub fn loss(&self, ds: &Dataset<T>) -> T {
        let out = self.predict_raw(ds.x.view());
        let taus = self.levels.as_slice();
        let mut total = T::zero();
        for (i, row) in out.outer_iter().enumerate() {
            for (k, &q) in row.iter().enumerate() {
                total = total + pinball_loss(ds.y[i] - q, taus[k]).expect("valid level");
            }
        }
        total / T::of(ds.len() as f64)
    }

    pub(crate) fn predict_row(&self, x: &[T]) -> Vec<T> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row shape");
        self.predict_raw(view).slice(s![0, ..]).to_vec()
    }
}
