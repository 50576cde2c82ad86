use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::amputation::{ampute, Mechanism, MissingnessSpec};
use crate::analysis::{estimate, pool, standard_estimands, Estimand, PooledEstimate};
use crate::data::DataMatrix;
use crate::datagen::{generate, FactorSpec};
use crate::mice::{run_mice, trace_rows, MiceConfig, TraceRow};
use crate::seed::{derive_seed, label_hash, rng_from_seed};

use super::grid::{expand_grid, Condition, ConditionGrid, HarnessMethod, MethodSettings};
use super::HarnessError;

const DATA_STREAM: u64 = 0x6461_7461;
const MASK_STREAM: u64 = 0x6d61_736b;
const IMPUTE_STREAM: u64 = 0x696d_7075;

/// Settings held fixed across the whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub n_rows: usize,
    pub n_imputations: usize,
    pub n_iterations: usize,
    pub methods: MethodSettings,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { n_rows: 1000, n_imputations: 5, n_iterations: 20, methods: MethodSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Error class of the failure.
    Failed(String),
}

impl Status {
    pub fn label(&self) -> String {
        match self {
            Status::Ok => "ok".to_string(),
            Status::Failed(class) => format!("failed:{class}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "ok" {
            Some(Status::Ok)
        } else {
            s.strip_prefix("failed:").map(|c| Status::Failed(c.to_string()))
        }
    }

    pub fn is_ok(&self) -> bool {
        *self == Status::Ok
    }
}

/// One pooled estimate for one estimand in one replication of one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub condition: Condition,
    pub rep: usize,
    pub estimand: Estimand,
    pub estimate: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// Full-data estimate for this replication.
    pub truth: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub records: Vec<ResultRecord>,
    /// Convergence trace of the imputation chains, when requested.
    pub trace: Option<Vec<TraceRow>>,
}

fn mech_code(mech: Mechanism) -> u64 {
    match mech {
        Mechanism::Mcar => 0,
        Mechanism::Mar => 1,
    }
}

/// Seed of the complete data for replication `rep` at `l` latent variables.
pub fn data_seed(base: u64, l: usize, rep: usize) -> u64 {
    derive_seed(base, &[DATA_STREAM, l as u64, rep as u64])
}

/// Seed of the missingness pattern, shared by every method.
pub fn mask_seed(base: u64, l: usize, mech: Mechanism, pm: f64, rep: usize) -> u64 {
    derive_seed(base, &[MASK_STREAM, l as u64, mech_code(mech), pm.to_bits(), rep as u64])
}

/// Seed of the imputation chains, distinct per method and component count.
pub fn impute_seed(base: u64, c: &Condition, rep: usize) -> u64 {
    derive_seed(
        base,
        &[IMPUTE_STREAM, c.l as u64, mech_code(c.mech), c.pm.to_bits(), label_hash(c.method.label()), c.nc as u64, rep as u64],
    )
}

/// Complete data and its amputed copy for one replication. Every method of
/// the same `(L, mechanism, pm, rep)` receives identical inputs.
pub fn replication_data(
    condition: &Condition,
    rep: usize,
    base_seed: u64,
    settings: &RunSettings,
) -> Result<(DataMatrix, DataMatrix), HarnessError> {
    let mut spec = FactorSpec::new(condition.l);
    spec.n_rows = settings.n_rows;
    let full = generate(&spec, &mut rng_from_seed(data_seed(base_seed, condition.l, rep)))?;
    let miss = MissingnessSpec::standard(condition.mech, condition.pm);
    let amputed = ampute(
        &full,
        &miss,
        &mut rng_from_seed(mask_seed(base_seed, condition.l, condition.mech, condition.pm, rep)),
    )?;
    Ok((full, amputed))
}

fn single(data: &DMatrix<f64>, e: Estimand) -> Result<PooledEstimate, &'static str> {
    let est = estimate(data, e).map_err(|err| err.class())?;
    pool(&[est]).map_err(|err| err.class())
}

fn pooled_over(datasets: &[DMatrix<f64>], e: Estimand) -> Result<PooledEstimate, &'static str> {
    let ests = datasets.iter().map(|d| estimate(d, e)).collect::<Result<Vec<_>, _>>().map_err(|err| err.class())?;
    pool(&ests).map_err(|err| err.class())
}

/// Generate, ampute, treat, analyze and pool one replication of one
/// condition. Failures become `failed` records rather than errors.
pub fn run_replication(
    condition: &Condition,
    rep: usize,
    base_seed: u64,
    settings: &RunSettings,
    keep_trace: bool,
) -> Result<ReplicationOutput, HarnessError> {
    let (full, amputed) = replication_data(condition, rep, base_seed, settings)?;
    let am = &settings.methods.analysis_columns;
    let estimands = standard_estimands(am);
    let truths: Vec<f64> = estimands
        .iter()
        .map(|&e| single(full.values(), e).map(|p| p.point).unwrap_or(f64::NAN))
        .collect();

    let mut trace = None;
    let pooled: Result<Vec<Result<PooledEstimate, &'static str>>, &'static str> = match condition.method {
        HarnessMethod::Fo => Ok(estimands.iter().map(|&e| single(full.values(), e)).collect()),
        HarnessMethod::Cc => {
            let cc = amputed.complete_cases(am);
            Ok(estimands.iter().map(|&e| single(&cc, e)).collect())
        }
        method => {
            let spec = method
                .imputer_spec(condition.nc, &settings.methods)
                .expect("imputation method has an imputer");
            let config = MiceConfig {
                n_imputations: settings.n_imputations,
                n_iterations: settings.n_iterations,
                visit_order: None,
                imputer: spec,
                seed: impute_seed(base_seed, condition, rep),
            };
            match run_mice(&amputed, &config) {
                Ok(set) => {
                    if keep_trace {
                        trace = Some(trace_rows(&set));
                    }
                    Ok(estimands.iter().map(|&e| pooled_over(&set.datasets, e)).collect())
                }
                Err(err) => Err(err.class()),
            }
        }
    };

    let records = estimands
        .iter()
        .enumerate()
        .map(|(k, &estimand)| {
            let outcome = match &pooled {
                Ok(per) => per[k],
                Err(class) => Err(*class),
            };
            let outcome = outcome.and_then(|p| {
                if p.point.is_finite() && p.ci_lower.is_finite() && p.ci_upper.is_finite() {
                    Ok(p)
                } else {
                    Err("NonFinite")
                }
            });
            match outcome {
                Ok(p) => ResultRecord {
                    condition: *condition,
                    rep,
                    estimand,
                    estimate: Some(p.point),
                    ci_lower: Some(p.ci_lower),
                    ci_upper: Some(p.ci_upper),
                    truth: truths[k],
                    status: Status::Ok,
                },
                Err(class) => ResultRecord {
                    condition: *condition,
                    rep,
                    estimand,
                    estimate: None,
                    ci_lower: None,
                    ci_upper: None,
                    truth: truths[k],
                    status: Status::Failed(class.to_string()),
                },
            }
        })
        .collect();
    Ok(ReplicationOutput { records, trace })
}

/// Everything a batch needs besides the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    pub grid: ConditionGrid,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    /// Replications (counted from 0) whose chain traces are kept.
    pub trace_reps: usize,
    pub settings: RunSettings,
}

/// Trace rows of one replication of one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTrace {
    pub condition: Condition,
    pub rep: usize,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub records: Vec<ResultRecord>,
    pub traces: Vec<ConditionTrace>,
}

/// Run every `(condition, rep)` task on a pool of `workers` threads. Output
/// order follows the grid order then the replication index, independent of
/// scheduling.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchOutput, HarnessError> {
    if spec.reps == 0 {
        return Err(HarnessError::InvalidConfig("reps must be at least 1".into()));
    }
    let conditions = expand_grid(&spec.grid)?;
    let tasks: Vec<(Condition, usize)> =
        conditions.iter().flat_map(|&c| (0..spec.reps).map(move |r| (c, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let outputs: Vec<Result<ReplicationOutput, HarnessError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(c, r)| run_replication(c, *r, spec.seed, &spec.settings, *r < spec.trace_reps))
            .collect()
    });
    let mut out = BatchOutput { records: Vec::new(), traces: Vec::new() };
    for ((condition, rep), result) in tasks.into_iter().zip(outputs) {
        let rep_out = result?;
        out.records.extend(rep_out.records);
        if let Some(rows) = rep_out.trace {
            out.traces.push(ConditionTrace { condition, rep, rows });
        }
    }
    Ok(out)
}
