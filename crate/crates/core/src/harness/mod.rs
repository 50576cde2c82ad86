//! Monte Carlo driver: expands the factor grid, runs seeded replications on a
//! worker pool and reads and writes the result tables.

mod config;
mod grid;
mod io;
mod run;
mod summarize;

use thiserror::Error;

pub use config::{resolve, FileConfig, Overrides, Profile, DEFAULT_SEED};
pub use grid::{expand_grid, Condition, ConditionGrid, HarnessMethod, MethodSettings};
pub use io::{
    format_float, read_results, read_summary, read_traces, summarize_traces, write_results, write_summary,
    write_trace_summary, write_traces, TraceRecord, TraceSummary, RESULTS_HEADER, SUMMARY_HEADER, TRACES_HEADER,
};
pub use run::{
    data_seed, impute_seed, mask_seed, replication_data, run_batch, run_replication, BatchOutput, BatchSpec,
    ConditionTrace, ReplicationOutput, ResultRecord, RunSettings, Status,
};
pub use summarize::{summarize, SummaryRow};

use crate::amputation::AmputeError;
use crate::datagen::DatagenError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("the condition grid is empty")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Ampute(#[from] AmputeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}
