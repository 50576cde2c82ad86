mod common;

use std::process::ExitCode;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use rayon::prelude::*;
use sdrmice_core::amputation::*;
use sdrmice_core::analysis::{pool, Estimand, Estimate, Scale};
use sdrmice_core::datagen::{generate, FactorSpec};
use sdrmice_core::dimred::*;
use sdrmice_core::harness::*;
use sdrmice_core::imputers::{DrawDiagnostics, ImputationDraw, ImputeError, ImputerSpec, UnivariateImputer};
use sdrmice_core::mice::{run_chain_with, run_mice, MiceConfig};
use sdrmice_core::seed::rng_from_seed;
use sdrmice_core::SimRng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oracle_equivalences() -> Outcome {
    let (mut pcr_gap, mut ols_gap, mut angle) = (0.0f64, 0.0f64, 0.0f64);
    let mut screen_ok = true;
    for k in 0..50u64 {
        let (x, y) = instance(1000 + k, 60, 8);
        for q in 1..=8 {
            let a = fit_pcovr(&x, &y, q, 1.0).unwrap().predict_centered(&x).unwrap();
            let b = fit_pcr(&x, &y, q).unwrap().predict_centered(&x).unwrap();
            pcr_gap = pcr_gap.max(max_abs_diff(&a, &b));

            let w = fit_pca(&x, q).unwrap().weights;
            let svd = x.clone().svd(false, true);
            let mut order: Vec<usize> = (0..8).collect();
            order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
            let vt = svd.v_t.unwrap();
            let v = DMatrix::from_fn(8, q, |i, c| vt[(order[c], i)]);
            angle = angle.max(max_angle_sine(&w, &v).asin());
        }
        let ls = ols_fitted(&x, &y);
        let pls = fit_pls(&x, &y, 8).unwrap().predict_centered(&x).unwrap();
        let pcovr = fit_pcovr(&x, &y, 8, 0.5).unwrap().predict_centered(&x).unwrap();
        ols_gap = ols_gap.max(max_abs_diff(&pls, &ls)).max(max_abs_diff(&pcovr, &ls));
        for rho in [0.0, 0.1, 0.2, 0.3, 0.5, 0.7] {
            let brute: Vec<usize> =
                (0..8).filter(|&j| pearson(x.column(j).as_slice(), y.as_slice()).abs() > rho).collect();
            screen_ok &= screen_predictors(&x, &y, rho) == brute;
        }
    }
    outcome(
        pcr_gap < 1e-6 && ols_gap < 1e-6 && angle < 1e-8 && screen_ok,
        format!("pcovr(1)-pcr {pcr_gap:.1e}, full-rank-ols {ols_gap:.1e}, max angle {angle:.1e}, screening exact {screen_ok}"),
    )
}

fn datagen_calibration() -> Outcome {
    let data = generate(&FactorSpec::new(10), &mut rng_from_seed(SEED)).unwrap();
    let x = data.values();
    let r = |a: usize, b: usize| pearson(x.column(a).as_slice(), x.column(b).as_slice());
    let avg = |pairs: Vec<(usize, usize)>| pairs.iter().map(|&(a, b)| r(a, b)).sum::<f64>() / pairs.len() as f64;
    let within = avg((0..10).flat_map(|s| [(3 * s, 3 * s + 1), (3 * s, 3 * s + 2), (3 * s + 1, 3 * s + 2)]).collect());
    let s12 = avg((0..3).flat_map(|a| (3..6).map(move |b| (a, b))).collect());
    let s1o = avg((0..3).flat_map(|a| (6..30).map(move |b| (a, b))).collect());
    outcome(
        (within - 0.72).abs() <= 0.04 && (s12 - 0.58).abs() <= 0.05 && (s1o - 0.07).abs() <= 0.05,
        format!("within {within:.3}, scale1-scale2 {s12:.3}, scale1-others {s1o:.3}"),
    )
}

fn amputation_calibration() -> Outcome {
    let data = generate(&FactorSpec::new(2), &mut rng_from_seed(SEED)).unwrap();
    let spec = MissingnessSpec::standard(Mechanism::Mar, 0.5);
    let out = ampute_mar(&data, &spec, &mut rng_from_seed(SEED + 1)).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (&t, &loc) in spec.targets.iter().zip(&spec.locations) {
        let eta = mar_score(&data, &spec.predictors, loc);
        let delta = out.column_mask(t).to_vec();
        let frac = out.missing_count(t) as f64 / data.n_rows() as f64;
        let a = auc(&eta, &delta).unwrap();
        let r2 = logistic_regression(&DMatrix::from_column_slice(eta.len(), 1, &eta), &delta).unwrap().mcfadden_r2();
        pass &= (frac - 0.5).abs() <= 0.03 && (a - 0.74).abs() <= 0.05 && (r2 - 0.14).abs() <= 0.06;
        parts.push(format!("z{} frac {frac:.3} auc {a:.3} r2 {r2:.3}", t + 1));
    }
    outcome(pass, parts.join("; "))
}

fn replicate(conditions: &[Condition], reps: usize) -> Vec<ResultRecord> {
    let settings = RunSettings::default();
    let tasks: Vec<(Condition, usize)> = conditions.iter().flat_map(|&c| (0..reps).map(move |r| (c, r))).collect();
    tasks
        .par_iter()
        .flat_map_iter(|(c, r)| run_replication(c, *r, SEED, &settings, false).unwrap().records)
        .collect()
}

fn cond(l: usize, method: HarnessMethod, nc: usize) -> Condition {
    Condition { l, mech: Mechanism::Mar, pm: 0.5, method, nc }
}

fn cor12<'a>(rows: &'a [SummaryRow], method: HarnessMethod, nc: usize) -> &'a SummaryRow {
    rows.iter()
        .find(|r| r.condition.method == method && r.condition.nc == nc && r.estimand == Estimand::Correlation(0, 1))
        .expect("cell present")
}

fn fmt_cell(r: &SummaryRow) -> String {
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
    format!("{}/nc={} prb {} cic {} n_ok {}", r.condition.method, r.condition.nc, f(r.prb), f(r.cic), r.n_ok)
}

fn headline_l2() -> Outcome {
    use HarnessMethod::*;
    let rows = summarize(&replicate(&[cond(2, Spcr, 2), cond(2, Pcr, 1), cond(2, Am, 0), cond(2, Cc, 0)], 50));
    let spcr = cor12(&rows, Spcr, 2);
    let pcr = cor12(&rows, Pcr, 1);
    let am = cor12(&rows, Am, 0);
    let cc = cor12(&rows, Cc, 0);
    let acceptable = |r: &SummaryRow| r.prb.is_some_and(|p| p < 10.0) && r.cic.is_some_and(|c| c >= 0.9);
    let pass = spcr.prb.is_some_and(|p| p < 10.0)
        && spcr.cic.is_some_and(|c| c >= 0.86)
        && pcr.prb.is_some_and(|p| p > 10.0)
        && !acceptable(am)
        && !acceptable(cc);
    outcome(pass, [spcr, pcr, am, cc].map(fmt_cell).join("; "))
}

type Batch = (Vec<ResultRecord>, Vec<SummaryRow>);

/// Shared L = 10 replications for the component-count criteria.
fn l10_batch(cache: &OnceLock<Batch>) -> &Batch {
    cache.get_or_init(|| {
        use HarnessMethod::*;
        let mut conditions: Vec<Condition> = (2..=5).map(|nc| cond(10, Spcr, nc)).collect();
        conditions.push(cond(10, Pcr, 5));
        for nc in [12, 20, 29] {
            conditions.push(cond(10, Pcr, nc));
            conditions.push(cond(10, Pcovr, nc));
        }
        conditions.push(cond(10, Spcr, 29));
        conditions.push(cond(10, Plsr, 29));
        let records = replicate(&conditions, 30);
        let rows = summarize(&records);
        (records, rows)
    })
}

fn l10_check(rows: &[SummaryRow]) -> Outcome {
    use HarnessMethod::*;
    let spcr: Vec<&SummaryRow> = (2..=5).map(|nc| cor12(rows, Spcr, nc)).collect();
    let pcr = cor12(rows, Pcr, 5);
    let pass = spcr.iter().all(|r| r.prb.is_some_and(|p| p < 10.0)) && pcr.prb.is_some_and(|p| p > 10.0);
    let mut parts: Vec<String> = spcr.iter().map(|r| fmt_cell(r)).collect();
    parts.push(fmt_cell(pcr));
    outcome(pass, parts.join("; "))
}

fn nc29_failures(records: &[ResultRecord]) -> Outcome {
    use HarnessMethod::*;
    let at29: Vec<&ResultRecord> = records.iter().filter(|r| r.condition.nc == 29).collect();
    let spcr_failed = at29
        .iter()
        .filter(|r| r.condition.method == Spcr)
        .all(|r| !r.status.is_ok() && r.estimate.is_none());
    let silent = at29
        .iter()
        .filter(|r| r.status.is_ok())
        .filter(|r| ![r.estimate, r.ci_lower, r.ci_upper].iter().all(|v| v.is_some_and(f64::is_finite)))
        .count();
    let count = |m: HarnessMethod, ok: bool| at29.iter().filter(|r| r.condition.method == m && r.status.is_ok() == ok).count();
    let classes: Vec<String> = {
        let mut c: Vec<String> = at29.iter().filter(|r| !r.status.is_ok()).map(|r| r.status.label()).collect();
        c.sort();
        c.dedup();
        c
    };
    outcome(
        spcr_failed && silent == 0 && count(Spcr, false) > 0,
        format!(
            "SPCR failed {}/{} ({}), PCR ok {}, PCovR ok {}, PLSR ok {}, ok records with non-finite output {silent}",
            count(Spcr, false),
            count(Spcr, false) + count(Spcr, true),
            classes.join(","),
            count(Pcr, true),
            count(Pcovr, true),
            count(Plsr, true),
        ),
    )
}

fn pcovr_converges_to_pcr(rows: &[SummaryRow]) -> Outcome {
    use HarnessMethod::*;
    let gaps: Vec<Option<f64>> = [12, 20, 29]
        .iter()
        .map(|&nc| Some((cor12(rows, Pcovr, nc).prb? - cor12(rows, Pcr, nc).prb?).abs()))
        .collect();
    let pass = match gaps.as_slice() {
        [Some(a), Some(b), Some(c)] => a > b && b > c,
        _ => false,
    };
    let shown: Vec<String> = gaps.iter().map(|g| g.map_or("NA".into(), |v| format!("{v:.3}"))).collect();
    outcome(pass, format!("|PRB(PCovR)-PRB(PCR)| at nc 12, 20, 29: {}", shown.join(", ")))
}

struct Recorder {
    seen: Mutex<Vec<DMatrix<f64>>>,
}

impl UnivariateImputer for Recorder {
    fn impute(&self, completed: &DMatrix<f64>, _: usize, missing: &[bool], _: &mut SimRng) -> Result<ImputationDraw, ImputeError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(completed.clone());
        let n_mis = missing.iter().filter(|&&m| m).count();
        Ok(ImputationDraw { values: vec![seen.len() as f64 * 1000.0; n_mis], diagnostics: DrawDiagnostics::default() })
    }
}

fn engine_invariants() -> Outcome {
    let mut spec = FactorSpec::new(2);
    spec.n_rows = 200;
    let full = generate(&spec, &mut rng_from_seed(SEED)).unwrap();
    let data = ampute(&full, &MissingnessSpec::standard(Mechanism::Mar, 0.5), &mut rng_from_seed(SEED + 1)).unwrap();

    let mut preserved = true;
    let mut deterministic = true;
    for imputer in [ImputerSpec::Pcr { n_components: 2 }, ImputerSpec::spcr(2), ImputerSpec::Pcovr { n_components: 2 }, ImputerSpec::Plsr { n_components: 2 }] {
        let mut cfg = MiceConfig::new(imputer, SEED);
        cfg.n_iterations = 5;
        let a = run_mice(&data, &cfg).unwrap();
        let b = run_mice(&data, &cfg).unwrap();
        deterministic &= a == b;
        for d in &a.datasets {
            for j in 0..data.n_cols() {
                for i in data.observed_rows(j) {
                    preserved &= d[(i, j)].to_bits() == data.values()[(i, j)].to_bits();
                }
            }
        }
    }

    let rec = Recorder { seen: Mutex::new(Vec::new()) };
    let visit = vec![0, 1, 2];
    run_chain_with(&data, &visit, 2, &rec, &mut rng_from_seed(1)).unwrap();
    let seen = rec.seen.into_inner().unwrap();
    let mut fresh = seen.len() == 6;
    for (call, m) in seen.iter().enumerate() {
        for (pos, &j) in visit.iter().enumerate() {
            let last = (0..call).rev().find(|&c| c % 3 == pos);
            for i in data.missing_rows(j) {
                fresh &= match last {
                    Some(c) => m[(i, j)] == (c + 1) as f64 * 1000.0,
                    None => m[(i, j)] < 1000.0,
                };
            }
        }
    }
    outcome(
        preserved && deterministic && fresh,
        format!("observed preserved {preserved}, deterministic {deterministic}, freshest values {fresh}"),
    )
}

fn pooling_hand_cases() -> Outcome {
    let est = |point: f64, var: f64| Estimate { point, se: var.sqrt(), scale: Scale::Identity };
    let p = pool(&[est(0.0, 1.0), est(1.0, 1.0)]).unwrap();
    let d2 = (p.point - 0.5).abs() < 1e-12
        && (p.within - 1.0).abs() < 1e-12
        && (p.between - 0.5).abs() < 1e-12
        && (p.total - 1.75).abs() < 1e-12;
    let q = pool(&[est(3.0, 0.25); 5]).unwrap();
    let z = 1.959963984540054;
    let b0 = q.between == 0.0
        && (q.total - q.within).abs() < 1e-12
        && q.df.is_infinite()
        && (q.ci_lower - (3.0 - z * 0.5)).abs() < 1e-12
        && (q.ci_upper - (3.0 + z * 0.5)).abs() < 1e-12;
    outcome(d2 && b0, format!("d=2 case {d2}, zero between-variance case {b0}"))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failures += 1;
        }
        println!("{status} [{id}] {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
    };

    report(1, "oracle equivalences", &oracle_equivalences);
    report(2, "data generation calibration", &datagen_calibration);
    report(3, "amputation calibration", &amputation_calibration);
    report(4, "L=2 headline result", &headline_l2);

    let l10 = OnceLock::new();
    report(5, "L=10 component check", &|| l10_check(&l10_batch(&l10).1));
    report(6, "nc=29 failures at L=10", &|| nc29_failures(&l10_batch(&l10).0));
    report(7, "PCovR approaches PCR as nc grows", &|| pcovr_converges_to_pcr(&l10_batch(&l10).1));
    report(8, "engine invariants", &engine_invariants);
    report(9, "pooling hand cases", &pooling_hand_cases);

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
