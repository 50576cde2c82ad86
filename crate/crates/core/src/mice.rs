//! The chained-equations loop.
//!
//! Within an iteration the targets are visited in order and each one is
//! imputed against the current completed matrix, so a target always sees the
//! values drawn for earlier targets in the same iteration and the previous
//! iteration's values for later ones.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::DataMatrix;
use crate::imputers::{DrawDiagnostics, ImputeError, ImputerSpec, MethodImputer, UnivariateImputer};
use crate::seed::{derive_seed, rng_from_seed};
use crate::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct MiceConfig {
    pub n_imputations: usize,
    pub n_iterations: usize,
    /// Targets in visiting order; `None` visits every incomplete column in
    /// ascending order.
    pub visit_order: Option<Vec<usize>>,
    pub imputer: ImputerSpec,
    pub seed: u64,
}

impl MiceConfig {
    /// Five imputations, twenty iterations, ascending visit order.
    pub fn new(imputer: ImputerSpec, seed: u64) -> Self {
        MiceConfig { n_imputations: 5, n_iterations: 20, visit_order: None, imputer, seed }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiceError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("column {0} has no observed values")]
    AllMissingColumn(usize),
    #[error("iteration {iteration}, variable {variable}: {source}")]
    Imputer { iteration: usize, variable: usize, source: ImputeError },
    #[error("chain {chain}: {source}")]
    Chain { chain: usize, source: Box<MiceError> },
}

impl MiceError {
    /// Error class of the innermost cause.
    pub fn class(&self) -> &'static str {
        match self {
            MiceError::InvalidConfig(_) => "InvalidConfig",
            MiceError::AllMissingColumn(_) => "AllMissingColumn",
            MiceError::Imputer { source, .. } => source.class(),
            MiceError::Chain { source, .. } => source.class(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableTrace {
    pub variable: usize,
    /// Mean of the imputed values.
    pub mean: f64,
    /// Sample standard deviation of the imputed values (0 for a single value).
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// 1-based.
    pub iteration: usize,
    pub variables: Vec<VariableTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub iteration: usize,
    pub variable: usize,
    pub diagnostics: DrawDiagnostics,
}

/// One chain's completed data and convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub completed: DMatrix<f64>,
    pub trace: Vec<IterationTrace>,
    pub diagnostics: Vec<DiagnosticRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedSet {
    pub datasets: Vec<DMatrix<f64>>,
    pub traces: Vec<Vec<IterationTrace>>,
    pub diagnostics: Vec<Vec<DiagnosticRecord>>,
}

/// Fill every missing cell with a uniform draw from its column's observed
/// values.
pub fn initialize<R: Rng + ?Sized>(data: &DataMatrix, rng: &mut R) -> Result<ChainState, MiceError> {
    let mut completed = data.values().clone();
    for j in data.incomplete_columns() {
        let observed = data.observed_values(j);
        if observed.is_empty() {
            return Err(MiceError::AllMissingColumn(j));
        }
        for i in data.missing_rows(j) {
            completed[(i, j)] = observed[rng.random_range(0..observed.len())];
        }
    }
    Ok(ChainState { completed, trace: Vec::new(), diagnostics: Vec::new() })
}

fn resolve_visit_order(data: &DataMatrix, order: Option<&[usize]>) -> Result<Vec<usize>, MiceError> {
    let Some(order) = order else {
        return Ok(data.incomplete_columns());
    };
    for (k, &j) in order.iter().enumerate() {
        if j >= data.n_cols() {
            return Err(MiceError::InvalidConfig(format!("visit column {j} out of range")));
        }
        if data.missing_count(j) == 0 {
            return Err(MiceError::InvalidConfig(format!("visit column {j} has no missing values")));
        }
        if order[..k].contains(&j) {
            return Err(MiceError::InvalidConfig(format!("visit column {j} repeated")));
        }
    }
    Ok(order.to_vec())
}

fn summarize_draw(variable: usize, values: &[f64]) -> VariableTrace {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    VariableTrace { variable, mean, sd }
}

/// Run one chain with an arbitrary univariate imputer.
pub fn run_chain_with(
    data: &DataMatrix,
    visit_order: &[usize],
    n_iterations: usize,
    imputer: &dyn UnivariateImputer,
    rng: &mut SimRng,
) -> Result<ChainState, MiceError> {
    let visit = resolve_visit_order(data, Some(visit_order))?;
    let mut state = initialize(data, rng)?;
    let missing_rows: Vec<Vec<usize>> = visit.iter().map(|&j| data.missing_rows(j)).collect();
    for iteration in 1..=n_iterations {
        let mut variables = Vec::with_capacity(visit.len());
        for (&j, rows) in visit.iter().zip(&missing_rows) {
            let draw = imputer
                .impute(&state.completed, j, data.column_mask(j), rng)
                .map_err(|source| MiceError::Imputer { iteration, variable: j, source })?;
            if draw.values.len() != rows.len() {
                return Err(MiceError::Imputer {
                    iteration,
                    variable: j,
                    source: ImputeError::DimensionMismatch { target: rows.len(), rows: draw.values.len() },
                });
            }
            for (&i, &v) in rows.iter().zip(&draw.values) {
                state.completed[(i, j)] = v;
            }
            variables.push(summarize_draw(j, &draw.values));
            state.diagnostics.push(DiagnosticRecord { iteration, variable: j, diagnostics: draw.diagnostics });
        }
        state.trace.push(IterationTrace { iteration, variables });
    }
    Ok(state)
}

fn validate(config: &MiceConfig) -> Result<(), MiceError> {
    if config.n_imputations == 0 || config.n_iterations == 0 {
        return Err(MiceError::InvalidConfig("imputations and iterations must be at least 1".into()));
    }
    Ok(())
}

/// Run one chain of the configured method.
pub fn run_chain(data: &DataMatrix, config: &MiceConfig, rng: &mut SimRng) -> Result<ChainState, MiceError> {
    validate(config)?;
    let visit = resolve_visit_order(data, config.visit_order.as_deref())?;
    let imputer = MethodImputer::new(config.imputer.clone(), data);
    run_chain_with(data, &visit, config.n_iterations, &imputer, rng)
}

/// Generator for chain `chain` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> SimRng {
    rng_from_seed(derive_seed(seed, &[chain as u64]))
}

/// Run `n_imputations` independent chains, each seeded from the config seed
/// and its chain index. Any chain failure fails the whole run.
pub fn run_mice(data: &DataMatrix, config: &MiceConfig) -> Result<ImputedSet, MiceError> {
    validate(config)?;
    let visit = resolve_visit_order(data, config.visit_order.as_deref())?;
    let imputer = MethodImputer::new(config.imputer.clone(), data);
    let chains: Vec<Result<ChainState, MiceError>> = (0..config.n_imputations)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(config.seed, c);
            run_chain_with(data, &visit, config.n_iterations, &imputer, &mut rng)
                .map_err(|e| MiceError::Chain { chain: c, source: Box::new(e) })
        })
        .collect();
    let mut set = ImputedSet { datasets: Vec::new(), traces: Vec::new(), diagnostics: Vec::new() };
    for chain in chains {
        let state = chain?;
        set.datasets.push(state.completed);
        set.traces.push(state.trace);
        set.diagnostics.push(state.diagnostics);
    }
    Ok(set)
}

/// Flat trace row for export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub chain: usize,
    pub iteration: usize,
    pub variable: usize,
    pub mean: f64,
    pub sd: f64,
}

pub fn trace_rows(set: &ImputedSet) -> Vec<TraceRow> {
    set.traces
        .iter()
        .enumerate()
        .flat_map(|(chain, trace)| {
            trace.iter().flat_map(move |it| {
                it.variables.iter().map(move |v| TraceRow {
                    chain,
                    iteration: it.iteration,
                    variable: v.variable,
                    mean: v.mean,
                    sd: v.sd,
                })
            })
        })
        .collect()
}

/// Write trace rows as CSV with header `chain,iteration,variable,mean,sd`.
/// Variables are written with their 1-based `z` labels.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chain", "iteration", "variable", "mean", "sd"])?;
    for r in rows {
        w.write_record([
            r.chain.to_string(),
            r.iteration.to_string(),
            format!("z{}", r.variable + 1),
            format!("{:.16e}", r.mean),
            format!("{:.16e}", r.sd),
        ])?;
    }
    w.flush()?;
    Ok(())
}
