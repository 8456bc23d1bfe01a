use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::data::{Dataset, Provenance};
use crate::error::{invalid, Error, Result};
use crate::quantile::{QuantileLevels, QuantileModel};

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal() -> StdNormal {
    StdNormal::new(0.0, 1.0).expect("valid parameters")
}

/// Synthetic regression problem with one feature `x ~ U(0, 1)` and a known
/// conditional density of `y` given `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// `y | x ~ N(mean_slope * x, (sd_base + sd_slope * x)^2)`.
    HeteroGauss {
        mean_slope: f64,
        sd_base: f64,
        sd_slope: f64,
    },
    /// Equal-or-weighted mixture of `N(-mode, sd^2)` and `N(+mode, sd^2)`,
    /// independent of `x`. `weight` is the mass of the upper mode.
    Bimodal { mode: f64, sd: f64, weight: f64 },
    /// `y | x ~ LogNormal(0, (sdlog_base + sdlog_slope * x)^2)`.
    LogNormal { sdlog_base: f64, sdlog_slope: f64 },
    /// `y | x ~ U(lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

impl Scenario {
    pub const NAMES: [&'static str; 4] = ["hetero-gauss", "bimodal", "lognormal", "uniform"];

    pub fn hetero_gauss() -> Self {
        Scenario::HeteroGauss {
            mean_slope: 1.0,
            sd_base: 1.0,
            sd_slope: 1.0,
        }
    }

    pub fn standard_normal() -> Self {
        Scenario::HeteroGauss {
            mean_slope: 0.0,
            sd_base: 1.0,
            sd_slope: 0.0,
        }
    }

    pub fn bimodal() -> Self {
        Scenario::Bimodal {
            mode: 3.0,
            sd: 0.5,
            weight: 0.5,
        }
    }

    pub fn lognormal() -> Self {
        Scenario::LogNormal {
            sdlog_base: 0.5,
            sdlog_slope: 0.5,
        }
    }

    pub fn uniform() -> Self {
        Scenario::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::HeteroGauss { .. } => "hetero-gauss",
            Scenario::Bimodal { .. } => "bimodal",
            Scenario::LogNormal { .. } => "lognormal",
            Scenario::Uniform { .. } => "uniform",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Scenario::HeteroGauss {
                sd_base, sd_slope, ..
            } => sd_base > 0.0 && sd_base + sd_slope > 0.0,
            Scenario::Bimodal { sd, weight, .. } => sd > 0.0 && (0.0..=1.0).contains(&weight),
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => sdlog_base > 0.0 && sdlog_base + sdlog_slope > 0.0,
            Scenario::Uniform { lo, hi } => hi > lo,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid parameters for scenario {self:?}"))
        }
    }

    fn gauss_params(mean_slope: f64, sd_base: f64, sd_slope: f64, x: f64) -> (f64, f64) {
        (mean_slope * x, sd_base + sd_slope * x)
    }

    /// Conditional density `f(y | x)`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (m, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                phi((y - m) / s) / s
            }
            Scenario::Bimodal { mode, sd, weight } => {
                (1.0 - weight) * phi((y + mode) / sd) / sd + weight * phi((y - mode) / sd) / sd
            }
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => {
                if y <= 0.0 {
                    return 0.0;
                }
                let s = sdlog_base + sdlog_slope * x;
                phi(y.ln() / s) / (s * y)
            }
            Scenario::Uniform { lo, hi } => {
                if (lo..=hi).contains(&y) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// Conditional CDF `P(Y <= y | x)`.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let n = std_normal();
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (m, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                n.cdf((y - m) / s)
            }
            Scenario::Bimodal { mode, sd, weight } => {
                (1.0 - weight) * n.cdf((y + mode) / sd) + weight * n.cdf((y - mode) / sd)
            }
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => {
                if y <= 0.0 {
                    0.0
                } else {
                    n.cdf(y.ln() / (sdlog_base + sdlog_slope * x))
                }
            }
            Scenario::Uniform { lo, hi } => ((y - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// Conditional quantile function.
    pub fn quantile(&self, x: f64, tau: f64) -> f64 {
        let n = std_normal();
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (m, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                m + s * n.inverse_cdf(tau)
            }
            Scenario::Bimodal { mode, sd, .. } => {
                let (mut lo, mut hi) = (-mode - 12.0 * sd, mode + 12.0 * sd);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(x, mid) < tau {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => ((sdlog_base + sdlog_slope * x) * n.inverse_cdf(tau)).exp(),
            Scenario::Uniform { lo, hi } => lo + tau * (hi - lo),
        }
    }

    /// Window holding all but a negligible tail of `y | x`.
    pub fn support(&self, x: f64) -> (f64, f64) {
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (m, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                (m - 6.0 * s, m + 6.0 * s)
            }
            Scenario::Bimodal { mode, sd, .. } => (-mode - 6.0 * sd, mode + 6.0 * sd),
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => (0.0, (6.0 * (sdlog_base + sdlog_slope * x)).exp()),
            Scenario::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Maximum of `f(. | x)` (for the mixture: the larger of the values at
    /// the two component means, a lower bound on the supremum).
    pub fn peak_density(&self, x: f64) -> f64 {
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (_, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                phi(0.0) / s
            }
            Scenario::Bimodal { mode, .. } => self.density(x, -mode).max(self.density(x, mode)),
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => {
                let s = sdlog_base + sdlog_slope * x;
                self.density(x, (-s * s).exp())
            }
            Scenario::Uniform { lo, hi } => 1.0 / (hi - lo),
        }
    }

    /// Lipschitz constant of `f(. | x)`; infinite for the uniform density.
    pub fn lipschitz(&self, x: f64) -> f64 {
        // max |phi'| = phi(1)
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (_, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                phi(1.0) / (s * s)
            }
            Scenario::Bimodal { sd, .. } => phi(1.0) / (sd * sd),
            Scenario::LogNormal { .. } => {
                let (lo, hi) = self.support(x);
                let n = 20_000;
                let h = (hi - lo) / n as f64;
                (0..n)
                    .map(|i| {
                        let a = lo + h * i as f64;
                        ((self.density(x, a + h) - self.density(x, a)) / h).abs()
                    })
                    .fold(0.0, f64::max)
                    * 1.05
            }
            Scenario::Uniform { .. } => f64::INFINITY,
        }
    }

    fn sample_y(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
        match *self {
            Scenario::HeteroGauss {
                mean_slope,
                sd_base,
                sd_slope,
            } => {
                let (m, s) = Self::gauss_params(mean_slope, sd_base, sd_slope, x);
                m + s * z
            }
            Scenario::Bimodal { mode, sd, weight } => {
                let upper = rng.random::<f64>() < weight;
                if upper {
                    mode + sd * z
                } else {
                    -mode + sd * z
                }
            }
            Scenario::LogNormal {
                sdlog_base,
                sdlog_slope,
            } => ((sdlog_base + sdlog_slope * x) * z).exp(),
            Scenario::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// `n` iid pairs `(x, y)`, deterministic in `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset<f64>> {
        if n == 0 {
            return invalid("scenario sample size must be at least 1");
        }
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.random::<f64>();
            xs.push(x);
            ys.push(self.sample_y(x, &mut rng));
        }
        Dataset::with_names(
            Array2::from_shape_vec((n, 1), xs).map_err(|e| Error::Numeric(e.to_string()))?,
            Array1::from_vec(ys),
            vec!["x".into()],
            Provenance::Scenario {
                name: self.name().into(),
                seed,
            },
        )
    }

    /// The exact conditional quantile function packaged as a model.
    pub fn oracle_model(&self, levels: QuantileLevels<f64>) -> QuantileModel<f64> {
        let sc = *self;
        QuantileModel::external(levels, 1, move |x, l| {
            l.as_slice()
                .iter()
                .map(|&tau| sc.quantile(x[0], tau))
                .collect()
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Scenario by name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hetero-gauss" => Ok(Self::hetero_gauss()),
            "bimodal" => Ok(Self::bimodal()),
            "lognormal" => Ok(Self::lognormal()),
            "uniform" => Ok(Self::uniform()),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario '{other}', expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}
