use cti::conformal::{cti_predict, partitions, set_contains, CtiCalibration};
use cti::evaluation::{coverage, mean_size};
use cti::interval::{BoundaryPolicy, IntervalPartition};
use cti::oracle::Scenario;
use cti::quantile::{fit_forest, ForestConfig, QuantileLevels, QuantileModel};
use proptest::prelude::*;

fn oracle_partitions(
    m: &QuantileModel<f64>,
    sc: Scenario,
    n: usize,
    seed: u64,
) -> (Vec<IntervalPartition<f64>>, Vec<f64>) {
    let ds = sc.generate(n, seed).unwrap();
    let p = partitions(m.predict_grids(ds.x.view()).unwrap());
    (p, ds.y.to_vec())
}

#[test]
fn marginal_coverage_over_repeated_draws() {
    // (n_cal + 1)(1 - alpha) = 184.5, so the exact coverage is 185/205
    let (alpha, n_cal, n_test, trials) = (0.1, 204, 500, 2000);
    let sc = Scenario::hetero_gauss();
    let model = sc.oracle_model(QuantileLevels::with_k(20).unwrap());
    let mut total = 0.0;
    for trial in 0..trials {
        let (cal, cal_y) = oracle_partitions(&model, sc, n_cal, 2 * trial);
        let (test, test_y) = oracle_partitions(&model, sc, n_test, 2 * trial + 1);
        let c = CtiCalibration::fit(&cal, &cal_y, alpha, BoundaryPolicy::Infinite).unwrap();
        let sets: Vec<_> = test.iter().map(|p| c.predict(p, false)).collect();
        total += coverage(&sets, &test_y).unwrap();
    }
    let mean = total / trials as f64;
    let se = (alpha * (1.0 - alpha) / (trials as usize * n_test) as f64).sqrt();
    assert!(mean >= 1.0 - alpha, "{mean}");
    assert!(
        mean <= 1.0 - alpha + 1.0 / (n_cal + 1) as f64 + 3.0 * se,
        "{mean}"
    );
}

#[test]
fn clamp_policy_keeps_coverage() {
    let (alpha, n_cal, n_test, trials) = (0.2, 149, 400, 300);
    let sc = Scenario::lognormal();
    let model = sc.oracle_model(QuantileLevels::with_k(10).unwrap());
    let mut total = 0.0;
    for trial in 0..trials {
        let (cal, cal_y) = oracle_partitions(&model, sc, n_cal, 1000 + 2 * trial);
        let (test, test_y) = oracle_partitions(&model, sc, n_test, 1001 + 2 * trial);
        let c = CtiCalibration::fit(&cal, &cal_y, alpha, BoundaryPolicy::Clamp).unwrap();
        let sets: Vec<_> = test.iter().map(|p| c.predict(p, false)).collect();
        total += coverage(&sets, &test_y).unwrap();
    }
    let mean = total / trials as f64;
    // out-of-range responses are never covered, so allow their 0.2% mass
    let se = (alpha * (1.0 - alpha) / (trials as usize * n_test) as f64).sqrt();
    assert!(mean >= 1.0 - alpha - 0.002 - 3.0 * se, "{mean}");
}

#[test]
fn calibration_points_are_covered_up_to_the_rank() {
    let sc = Scenario::hetero_gauss();
    let levels = QuantileLevels::with_k(20).unwrap();
    let train = sc.generate(800, 1).unwrap();
    let model = fit_forest(
        &train,
        &levels,
        &ForestConfig {
            n_trees: 30,
            ..Default::default()
        },
    )
    .unwrap();
    let cal = sc.generate(300, 2).unwrap();
    let parts = partitions(model.predict_grids(cal.x.view()).unwrap());
    let cal_y = cal.y.to_vec();
    for alpha in [0.05, 0.1, 0.3] {
        let c = CtiCalibration::fit(&parts, &cal_y, alpha, BoundaryPolicy::Clamp).unwrap();
        let mut covered = 0;
        let mut exempt = 0;
        for ((p, &y), s) in parts.iter().zip(&cal_y).zip(&c.scores) {
            if set_contains(&c.predict(p, false), y).unwrap() {
                covered += 1;
            } else if s.boundary_clamped {
                exempt += 1;
            }
        }
        assert!(
            covered + exempt + 1 >= c.threshold.rank,
            "alpha {alpha}: {covered} + {exempt}"
        );
    }
}

#[test]
fn cti_sets_are_no_larger_than_the_full_range() {
    let sc = Scenario::bimodal();
    let model = sc.oracle_model(QuantileLevels::with_k(30).unwrap());
    let (cal, cal_y) = oracle_partitions(&model, sc, 500, 5);
    let (test, _) = oracle_partitions(&model, sc, 500, 6);
    let c = CtiCalibration::fit(&cal, &cal_y, 0.1, BoundaryPolicy::Clamp).unwrap();
    let sets: Vec<_> = test.iter().map(|p| c.predict(p, false)).collect();
    let full: f64 = test.iter().map(|p| p.total_length()).sum::<f64>() / test.len() as f64;
    assert!(mean_size(&sets).unwrap() <= full);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smaller_alpha_gives_larger_threshold_and_nested_sets(
        seed in 0u64..1000,
        a1 in 0.01f64..0.5,
        gap in 0.0f64..0.4,
    ) {
        let a2 = a1 + gap;
        let sc = Scenario::hetero_gauss();
        let model = sc.oracle_model(QuantileLevels::with_k(10).unwrap());
        let (cal, cal_y) = oracle_partitions(&model, sc, 60, seed);
        let (test, _) = oracle_partitions(&model, sc, 20, seed + 5000);
        let c1 = CtiCalibration::fit(&cal, &cal_y, a1, BoundaryPolicy::Clamp).unwrap();
        let c2 = CtiCalibration::fit(&cal, &cal_y, a2, BoundaryPolicy::Clamp).unwrap();
        prop_assert!(c1.threshold.t >= c2.threshold.t);
        for p in &test {
            let s1 = cti_predict(p, &c1.threshold);
            let s2 = cti_predict(p, &c2.threshold);
            prop_assert!(s2.is_subset_of(&s1));
        }
    }
}
