use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sdrmice_core::harness::{
    read_results, read_traces, resolve, run_batch, summarize, summarize_traces, write_results, write_summary,
    write_trace_summary, write_traces, FileConfig, Overrides, Profile,
};

#[derive(Parser)]
#[command(name = "sdrmice", version, about = "Monte Carlo study of MICE with dimensionality-reduction imputers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every condition of the grid and write results.csv, summary.csv and traces.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_parser = parse_profile)]
        profile: Option<Profile>,
    },
    /// Recompute summary metrics from a results.csv.
    Summarize {
        /// Directory holding results.csv.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-iteration chain statistics from a traces.csv.
    Trace {
        /// Directory holding traces.csv.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::parse(s).map_err(|e| e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn run(config: &Path, out: &Path, overrides: Overrides) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let file = FileConfig::parse(&text).with_context(|| format!("parsing {}", config.display()))?;
    let spec = resolve(&file, &overrides)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let started = Instant::now();
    let batch = run_batch(&spec)?;
    write_results(&batch.records, create(&out.join("results.csv"))?)?;
    write_traces(&batch.traces, create(&out.join("traces.csv"))?)?;
    write_summary(&summarize(&batch.records), create(&out.join("summary.csv"))?)?;

    let failed = batch.records.iter().filter(|r| !r.status.is_ok()).count();
    eprintln!(
        "{} records ({} failed) in {:.1}s, written to {}",
        batch.records.len(),
        failed,
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, reps, seed, workers, profile } => {
            run(&config, &out, Overrides { profile, reps, seed, workers })
        }
        Command::Summarize { input, out } => {
            let records = read_results(open(&input.join("results.csv"))?)?;
            write_summary(&summarize(&records), create(&out)?)?;
            Ok(())
        }
        Command::Trace { input } => {
            let records = read_traces(open(&input.join("traces.csv"))?)?;
            write_trace_summary(&summarize_traces(&records), io::stdout().lock())?;
            Ok(())
        }
    }
}
