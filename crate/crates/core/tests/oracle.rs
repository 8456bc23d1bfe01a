use cti::conformal::{partitions, CtiCalibration};
use cti::interval::{BoundaryPolicy, IntervalPartition};
use cti::oracle::{
    lipschitz_bound, oracle_expected_length, oracle_threshold, OracleOptions, Scenario,
};
use cti::quantile::{fit_forest, ForestConfig, QuantileLevels};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn density_is_sandwiched_by_inverse_interval_length() {
    let k = 100;
    let sc = Scenario::hetero_gauss();
    let model = sc.oracle_model(QuantileLevels::with_k(k).unwrap());
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        let p = IntervalPartition::new(model.predict_grid(&[x]).unwrap());
        let lip = sc.lipschitz(x);
        for j in 1..=k {
            let (a, b) = p.bounds(j);
            let len = b - a;
            let f_mid = sc.density(x, 0.5 * (a + b));
            let gap = (f_mid - 1.0 / (k as f64 * len)).abs();
            assert!(gap <= lip * len, "x={x} k={j}: {gap} > {}", lip * len);
        }
    }
}

#[test]
fn cti_set_points_clear_the_density_floor() {
    // a fitted (imperfect) model: each interval's true mass is (1 - delta)/K
    let k = 20;
    let sc = Scenario::hetero_gauss();
    let levels = QuantileLevels::with_k(k).unwrap();
    let train = sc.generate(3000, 1).unwrap();
    let model = fit_forest(
        &train,
        &levels,
        &ForestConfig {
            n_trees: 50,
            min_leaf: 20,
            ..Default::default()
        },
    )
    .unwrap();
    let cal = sc.generate(1000, 2).unwrap();
    let cal_p = partitions(model.predict_grids(cal.x.view()).unwrap());
    let c = CtiCalibration::fit(
        &cal_p,
        cal.y.as_slice().unwrap(),
        0.1,
        BoundaryPolicy::Clamp,
    )
    .unwrap();
    let t = c.threshold.t;
    let test = sc.generate(200, 3).unwrap();
    let mut checked = 0;
    for row in 0..test.len() {
        let x = test.x[[row, 0]];
        let p = IntervalPartition::new(model.predict_grid(&[x]).unwrap());
        let lip = sc.lipschitz(x);
        for j in 1..=k {
            let (a, b) = p.bounds(j);
            if b - a > t || b - a <= 0.0 {
                continue;
            }
            let delta = 1.0 - k as f64 * (sc.cdf(x, b) - sc.cdf(x, a));
            let floor = (1.0 - delta) / (k as f64 * t) - lip * t / 2.0;
            for s in 0..=50 {
                let y = a + (b - a) * s as f64 / 50.0;
                assert!(sc.density(x, y) >= floor - 1e-12, "x={x} y={y}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

/// Smallest expected length of a union of grid cells with mass >= 1 - alpha,
/// found by taking cells in decreasing density.
fn discrete_optimum(sc: &Scenario, alpha: f64, y_lo: f64, y_hi: f64) -> f64 {
    let (nx, ny) = (200, 4000);
    let hx = 1.0 / nx as f64;
    let hy = (y_hi - y_lo) / ny as f64;
    let mut cells: Vec<f64> = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = (i as f64 + 0.5) * hx;
        for j in 0..ny {
            cells.push(sc.density(x, y_lo + (j as f64 + 0.5) * hy));
        }
    }
    cells.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut mass = 0.0;
    let mut length = 0.0;
    for f in cells {
        if mass >= 1.0 - alpha {
            break;
        }
        mass += f * hx * hy;
        length += hx * hy;
    }
    length
}

#[test]
fn no_cell_union_beats_the_level_set() {
    let alpha = 0.1;
    for (sc, lo, hi) in [
        (Scenario::hetero_gauss(), -7.0, 9.0),
        (Scenario::bimodal(), -6.5, 6.5),
        (Scenario::lognormal(), 0.0, 30.0),
    ] {
        let opts = OracleOptions {
            mc_n: 200_000,
            ..Default::default()
        };
        let t = oracle_threshold(&sc, alpha, &opts).unwrap();
        let oracle = oracle_expected_length(&sc, t, &opts).unwrap();
        let best = discrete_optimum(&sc, alpha, lo, hi);
        let tol = 0.02 * oracle.expected_length + 3.0 * oracle.std_error;
        assert!(
            best >= oracle.expected_length - tol,
            "{sc}: {best} vs {}",
            oracle.expected_length
        );
        assert!(
            best <= oracle.expected_length + tol,
            "{sc}: {best} vs {}",
            oracle.expected_length
        );
    }
}

/// Random non-negative piecewise-linear function on `[a, b]`.
fn random_piecewise(rng: &mut ChaCha8Rng) -> (f64, f64, Vec<(f64, f64)>) {
    let a = rng.random_range(-5.0..5.0);
    let b = a + rng.random_range(0.01..5.0);
    let knots = rng.random_range(2..12);
    let mut xs: Vec<f64> = (0..knots - 2).map(|_| rng.random_range(a..b)).collect();
    xs.push(a);
    xs.push(b);
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let pts = xs
        .into_iter()
        .map(|x| (x, rng.random_range(0.0..3.0)))
        .collect();
    (a, b, pts)
}

fn eval(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[test]
fn lipschitz_bound_holds_for_random_piecewise_linear_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let (a, b, pts) = random_piecewise(&mut rng);
        let lip = pts
            .windows(2)
            .filter(|w| w[1].0 > w[0].0)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max);
        let mass: f64 = pts
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        let (lo, hi) = lipschitz_bound(a, b, lip, mass).unwrap();
        for s in 0..=2000 {
            let v = eval(&pts, a + (b - a) * s as f64 / 2000.0);
            assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }
}
