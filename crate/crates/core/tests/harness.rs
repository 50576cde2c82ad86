use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use sdrmice_core::amputation::Mechanism;
use sdrmice_core::analysis::Estimand;
use sdrmice_core::harness::*;

fn small_spec(methods: Vec<HarnessMethod>, nc: Vec<usize>, workers: usize) -> BatchSpec {
    let mut spec = Profile::Desk.defaults();
    spec.grid = ConditionGrid {
        l_levels: vec![2],
        mechanisms: vec![Mechanism::Mcar, Mechanism::Mar],
        pm_levels: vec![0.25],
        methods,
        nc_levels: nc,
    };
    spec.reps = 3;
    spec.workers = workers;
    spec.settings.n_rows = 120;
    spec.settings.n_imputations = 2;
    spec.settings.n_iterations = 3;
    spec
}

fn csv_bytes(out: &BatchOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_results(&out.records, &mut buf).unwrap();
    buf
}

fn all_methods() -> Vec<HarnessMethod> {
    HarnessMethod::ALL.to_vec()
}

#[test]
fn output_independent_of_worker_count() {
    let one = run_batch(&small_spec(all_methods(), vec![1, 2], 1)).unwrap();
    let three = run_batch(&small_spec(all_methods(), vec![1, 2], 3)).unwrap();
    assert_eq!(csv_bytes(&one), csv_bytes(&three));
    assert_eq!(one.traces, three.traces);
    let again = run_batch(&small_spec(all_methods(), vec![1, 2], 2)).unwrap();
    assert_eq!(csv_bytes(&one), csv_bytes(&again));
}

fn fingerprint(d: &sdrmice_core::DataMatrix) -> u64 {
    let mut h = DefaultHasher::new();
    for v in d.values().iter() {
        v.to_bits().hash(&mut h);
    }
    d.mask().hash(&mut h);
    h.finish()
}

#[test]
fn methods_share_data_and_mask() {
    let settings = small_spec(vec![], vec![], 1).settings;
    for rep in 0..3 {
        let prints: Vec<(u64, u64)> = HarnessMethod::ALL
            .iter()
            .map(|&method| {
                let c = Condition { l: 2, mech: Mechanism::Mar, pm: 0.5, method, nc: if method.uses_components() { 2 } else { 0 } };
                let (full, amputed) = replication_data(&c, rep, 9, &settings).unwrap();
                (fingerprint(&full), fingerprint(&amputed))
            })
            .collect();
        assert!(prints.windows(2).all(|w| w[0] == w[1]));
    }
    let c = Condition { l: 2, mech: Mechanism::Mar, pm: 0.5, method: HarnessMethod::Cc, nc: 0 };
    let a = replication_data(&c, 0, 9, &settings).unwrap();
    let b = replication_data(&c, 1, 9, &settings).unwrap();
    assert_ne!(fingerprint(&a.0), fingerprint(&b.0));
}

#[test]
fn fully_observed_analysis_has_no_bias() {
    let out = run_batch(&small_spec(vec![HarnessMethod::Fo], vec![], 1)).unwrap();
    for r in &out.records {
        assert_eq!(r.estimate, Some(r.truth));
    }
    for row in summarize(&out.records) {
        assert_eq!(row.prb, Some(0.0));
    }
}

#[test]
fn failing_cells_do_not_contaminate_others() {
    let mut spec = small_spec(vec![HarnessMethod::Spcr, HarnessMethod::Cc], vec![5], 1);
    spec.settings.methods.threshold_grid = vec![0.95];
    let out = run_batch(&spec).unwrap();
    let spcr: Vec<_> = out.records.iter().filter(|r| r.condition.method == HarnessMethod::Spcr).collect();
    assert!(spcr.iter().all(|r| r.status == Status::Failed("NoFeasibleThreshold".into()) && r.estimate.is_none()));
    let cc_alone = run_batch(&small_spec(vec![HarnessMethod::Cc], vec![], 1)).unwrap();
    let cc: Vec<_> = out.records.iter().filter(|r| r.condition.method == HarnessMethod::Cc).cloned().collect();
    assert_eq!(cc, cc_alone.records);
    assert!(cc.iter().all(|r| r.status.is_ok()));
}

#[test]
fn results_roundtrip_with_full_precision() {
    let out = run_batch(&small_spec(vec![HarnessMethod::Pcr, HarnessMethod::Cc], vec![1], 1)).unwrap();
    let bytes = csv_bytes(&out);
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert!(text.starts_with("L,mech,pm,method,nc,rep,estimand,estimate,ci_lower,ci_upper,truth,status\n"));
    let first = text.lines().nth(1).unwrap();
    let mantissa = first.split(',').nth(7).unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    let back = read_results(bytes.as_slice()).unwrap();
    assert_eq!(back, out.records);
}

#[test]
fn summary_matches_direct_recomputation() {
    let out = run_batch(&small_spec(vec![HarnessMethod::Pcr, HarnessMethod::Am, HarnessMethod::Cc], vec![1, 2], 1)).unwrap();
    let rows = summarize(&out.records);
    type Key = (String, String, String);
    let mut acc: HashMap<Key, (f64, usize, f64, usize, Vec<(f64, f64)>)> = HashMap::new();
    for r in &out.records {
        let key = (format!("{}/{}", r.condition.method, r.condition.nc), r.condition.mech.label().to_string(), r.estimand.to_string());
        let e = acc.entry(key).or_insert((0.0, 0, 0.0, 0, Vec::new()));
        e.0 += r.truth;
        e.1 += 1;
        if let (Some(p), Some(lo), Some(hi)) = (r.estimate, r.ci_lower, r.ci_upper) {
            e.2 += p;
            e.3 += 1;
            e.4.push((lo, hi));
        }
    }
    assert_eq!(rows.len(), acc.len());
    for row in &rows {
        let key = (format!("{}/{}", row.condition.method, row.condition.nc), row.condition.mech.label().to_string(), row.estimand.to_string());
        let (ts, tn, ps, pn, cis) = &acc[&key];
        let truth = ts / *tn as f64;
        let prb = ((ps / *pn as f64 - truth) / truth).abs() * 100.0;
        let ciw = cis.iter().map(|(l, h)| h - l).sum::<f64>() / cis.len() as f64;
        let cic = cis.iter().filter(|(l, h)| *l <= truth && truth <= *h).count() as f64 / cis.len() as f64;
        assert!((row.prb.unwrap() - prb).abs() < 1e-9 * (1.0 + prb));
        assert!((row.ciw.unwrap() - ciw).abs() < 1e-12);
        assert_eq!(row.cic.unwrap(), cic);
        assert_eq!(row.n_ok, *pn);
    }
    let mut buf = Vec::new();
    write_summary(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf.clone()).unwrap().starts_with("L,mech,pm,method,nc,estimand,prb,ciw,cic,n_ok\n"));
    assert_eq!(read_summary(buf.as_slice()).unwrap(), rows);
}

#[test]
fn traces_written_for_requested_replications() {
    let mut spec = small_spec(vec![HarnessMethod::Pcr, HarnessMethod::Cc], vec![1], 1);
    spec.trace_reps = 2;
    let out = run_batch(&spec).unwrap();
    assert_eq!(out.traces.len(), 2 * 2);
    assert!(out.traces.iter().all(|t| t.rep < 2 && t.condition.method == HarnessMethod::Pcr));
    let mut buf = Vec::new();
    write_traces(&out.traces, &mut buf).unwrap();
    let back = read_traces(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 4 * 2 * 3 * 3);
    let summary = summarize_traces(&back);
    assert_eq!(summary.len(), 4 * 3 * 3);
    assert!(summary.iter().all(|s| s.sd_of_means >= 0.0));
}

#[test]
fn records_cover_every_estimand() {
    let out = run_batch(&small_spec(vec![HarnessMethod::Cc], vec![], 1)).unwrap();
    assert_eq!(out.records.len(), 2 * 3 * 12);
    assert!(out.records.iter().any(|r| r.estimand == Estimand::Correlation(0, 1)));
}
