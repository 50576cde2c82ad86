mod common;

use common::pearson;
use nalgebra::DMatrix;
use proptest::prelude::*;
use sdrmice_core::amputation::*;
use sdrmice_core::datagen::*;
use sdrmice_core::seed::rng_from_seed;

fn empirical_correlation(x: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    DMatrix::from_fn(p, p, |a, b| pearson(x.column(a).as_slice(), x.column(b).as_slice()))
}

#[test]
fn correlations_approach_implied_matrix() {
    for l in [2, 10] {
        let spec = FactorSpec::new(l);
        let data = generate(&spec, &mut rng_from_seed(l as u64)).unwrap();
        let implied = implied_correlation(&spec).unwrap();
        let emp = empirical_correlation(data.values());
        assert!((emp - implied).abs().max() < 0.15);
    }
}

#[test]
fn moments_within_sampling_bounds() {
    let data = generate(&FactorSpec::new(2), &mut rng_from_seed(77)).unwrap();
    for j in 0..6 {
        let col = data.values().column(j);
        let m = col.mean();
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 999.0;
        assert!((m - 5.0).abs() < 0.25);
        assert!((v - 6.5).abs() < 0.7);
    }
}

#[test]
fn mcar_fraction() {
    let data = generate(&FactorSpec::new(2), &mut rng_from_seed(1)).unwrap();
    let out = ampute_mcar(&data, &MissingnessSpec::standard(Mechanism::Mcar, 0.5), &mut rng_from_seed(2)).unwrap();
    for j in 0..3 {
        assert!((out.missing_count(j) as f64 / 1000.0 - 0.5).abs() < 0.05);
    }
    for j in 3..6 {
        assert_eq!(out.missing_count(j), 0);
    }
}

#[test]
fn calibrated_intercept_hits_target_proportion() {
    let data = generate(&FactorSpec::new(2), &mut rng_from_seed(4)).unwrap();
    for loc in [Location::Right, Location::Left, Location::Tails] {
        let eta = mar_score(&data, &[3, 4, 5], loc);
        for pm in [0.1, 0.25, 0.5] {
            let b = calibrate_intercept(&eta, pm);
            let achieved = eta.iter().map(|&e| logistic(b + e)).sum::<f64>() / eta.len() as f64;
            assert!((achieved - pm).abs() < 1e-6);
        }
    }
}

#[test]
fn mar_fraction_and_right_pattern_shift() {
    let data = generate(&FactorSpec::new(2), &mut rng_from_seed(8)).unwrap();
    let out = ampute_mar(&data, &MissingnessSpec::standard(Mechanism::Mar, 0.5), &mut rng_from_seed(9)).unwrap();
    for j in 0..3 {
        assert!((out.missing_count(j) as f64 / 1000.0 - 0.5).abs() < 0.05);
    }
    let s: Vec<f64> = (0..1000).map(|i| (3..6).map(|j| data.values()[(i, j)]).sum()).collect();
    let mask = out.column_mask(0);
    let mean_of = |want: bool| {
        let v: Vec<f64> = s.iter().zip(mask).filter(|(_, &m)| m == want).map(|(x, _)| *x).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_of(true) > mean_of(false));
}

#[test]
fn mcfadden_against_direct_likelihood() {
    let x = DMatrix::from_column_slice(8, 1, &[-2.0, -1.0, -0.5, 0.0, 0.2, 0.5, 1.0, 2.0]);
    let y = [false, false, true, false, true, false, true, true];
    let fit = logistic_regression(&x, &y).unwrap();
    let ll: f64 = (0..8)
        .map(|i| {
            let p = logistic(fit.coefficients[0] + fit.coefficients[1] * x[(i, 0)]);
            if y[i] { p.ln() } else { (1.0 - p).ln() }
        })
        .sum();
    assert!((ll - fit.log_likelihood).abs() < 1e-9);
    assert!((fit.null_log_likelihood - 8.0 * 0.5f64.ln()).abs() < 1e-12);
    // score equations hold at the optimum
    let score: f64 = (0..8)
        .map(|i| (y[i] as u8 as f64 - logistic(fit.coefficients[0] + fit.coefficients[1] * x[(i, 0)])) * x[(i, 0)])
        .sum();
    assert!(score.abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rescaling_keeps_correlations(seed in any::<u64>(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let mut spec = FactorSpec::new(3);
        spec.n_rows = 200;
        let data = generate(&spec, &mut rng_from_seed(seed)).unwrap();
        let x = data.values();
        let y = x.map(|v| a * v + b);
        prop_assert!((empirical_correlation(x) - empirical_correlation(&y)).abs().max() < 1e-12);
    }

    #[test]
    fn amputation_only_touches_target_masks(seed in any::<u64>(), pm in 0.0f64..0.9, mar in any::<bool>()) {
        let mut spec = FactorSpec::new(2);
        spec.n_rows = 200;
        let data = generate(&spec, &mut rng_from_seed(seed)).unwrap();
        let mech = if mar { Mechanism::Mar } else { Mechanism::Mcar };
        let out = ampute(&data, &MissingnessSpec::standard(mech, pm), &mut rng_from_seed(seed ^ 1)).unwrap();
        prop_assert_eq!(out.values(), data.values());
        for j in 3..6 {
            prop_assert_eq!(out.missing_count(j), 0);
        }
    }

    #[test]
    fn psi_positive_definite_for_supported_sizes(l in 2usize..60) {
        prop_assert!(build_psi(&FactorSpec::new(l)).is_ok());
    }
}
