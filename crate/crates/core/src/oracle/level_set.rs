//! Density super-level sets `{y : f(y|x) >= t'}` and the density threshold
//! `t'` giving them marginal mass `1 - alpha`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conformal::Interval;
use crate::error::{invalid, Error, Result};

use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Monte Carlo draws for the threshold search.
    pub mc_n: usize,
    /// Sampled inputs for the expected set length.
    pub n_x: usize,
    /// Grid points per level-set scan.
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            mc_n: 100_000,
            n_x: 2000,
            grid_points: 2048,
            seed: 0,
        }
    }
}

pub const MIN_MC_DRAWS: usize = 10_000;
const MAX_BISECTIONS: usize = 100;

/// Largest `t` with `P(f(Y|X) >= t) >= 1 - alpha`, by bisection on a Monte
/// Carlo sample of density values until the bracket is narrower than
/// `1e-4` times the largest sampled density.
pub fn oracle_threshold(scenario: &Scenario, alpha: f64, opts: &OracleOptions) -> Result<f64> {
    if opts.mc_n < MIN_MC_DRAWS {
        return invalid(format!(
            "need at least {MIN_MC_DRAWS} Monte Carlo draws, got {}",
            opts.mc_n
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let ds = scenario.generate(opts.mc_n, opts.seed)?;
    let mut dens: Vec<f64> = (0..ds.len())
        .map(|i| scenario.density(ds.x[[i, 0]], ds.y[i]))
        .collect();
    dens.sort_by(|a, b| a.partial_cmp(b).expect("finite densities"));
    let n = dens.len() as f64;
    let max = *dens.last().expect("non-empty");
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::Numeric(format!("largest sampled density is {max}")));
    }
    // fraction of draws with density >= t
    let upper_mass = |t: f64| (dens.len() - dens.partition_point(|&d| d < t)) as f64 / n;
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, max * (1.0 + 1e-9));
    for _ in 0..MAX_BISECTIONS {
        if hi - lo < 1e-4 * max {
            return Ok(lo);
        }
        let mid = 0.5 * (lo + hi);
        if upper_mass(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!(
        "density threshold bisection did not converge in {MAX_BISECTIONS} steps"
    )))
}

/// Super-level set of `f(. | x)` at `t`, found on a grid and refined by
/// bisection at every crossing.
pub fn oracle_set(
    scenario: &Scenario,
    x: f64,
    t: f64,
    grid_points: usize,
) -> Result<Vec<Interval<f64>>> {
    if grid_points < 2 {
        return invalid("level-set grid needs at least 2 points");
    }
    let (a, b) = scenario.support(x);
    // pad so that jumps at the support edge are bracketed
    let pad = if matches!(scenario, Scenario::Uniform { .. }) {
        0.25 * (b - a)
    } else {
        0.0
    };
    let (a, b) = (a - pad, b + pad);
    let h = (b - a) / (grid_points - 1) as f64;
    let inside = |y: f64| scenario.density(x, y) >= t;
    let crossing = |mut out_pt: f64, mut in_pt: f64| {
        for _ in 0..80 {
            let mid = 0.5 * (out_pt + in_pt);
            if inside(mid) {
                in_pt = mid;
            } else {
                out_pt = mid;
            }
        }
        0.5 * (out_pt + in_pt)
    };

    let mut comps = Vec::new();
    let mut start: Option<f64> = None;
    let mut prev = a;
    let mut prev_in = inside(a);
    if prev_in {
        start = Some(a);
    }
    for i in 1..grid_points {
        let y = if i == grid_points - 1 {
            b
        } else {
            a + h * i as f64
        };
        let now_in = inside(y);
        match (prev_in, now_in) {
            (false, true) => start = Some(crossing(prev, y)),
            (true, false) => {
                let lo = start.take().expect("open run");
                comps.push(Interval {
                    lo,
                    hi: crossing(y, prev),
                });
            }
            _ => {}
        }
        prev = y;
        prev_in = now_in;
    }
    if let Some(lo) = start {
        comps.push(Interval { lo, hi: b });
    }
    if comps.is_empty() && t > 0.0 && scenario.peak_density(x) >= t {
        return Err(Error::Numeric(format!(
            "grid of {grid_points} points missed the level set at t={t} for x={x}"
        )));
    }
    Ok(comps)
}

/// Oracle set summary across inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSet {
    pub threshold: f64,
    pub expected_length: f64,
    pub std_error: f64,
    pub n_x: usize,
}

/// Expected Lebesgue measure of the oracle set over `opts.n_x` sampled inputs.
pub fn oracle_expected_length(
    scenario: &Scenario,
    t: f64,
    opts: &OracleOptions,
) -> Result<OracleSet> {
    if opts.n_x < 2 {
        return invalid("need at least two sampled inputs");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let lengths = (0..opts.n_x)
        .map(|_| {
            let x = rng.random::<f64>();
            oracle_set(scenario, x, t, opts.grid_points)
                .map(|c| c.iter().map(|iv| iv.hi - iv.lo).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(OracleSet {
        threshold: t,
        expected_length: mean,
        std_error: (var / n).sqrt(),
        n_x: opts.n_x,
    })
}
