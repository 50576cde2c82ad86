use std::collections::HashMap;
use std::io::{Read, Write};

use crate::amputation::Mechanism;
use crate::analysis::Estimand;
use crate::linalg::{mean, variance};

use super::grid::{Condition, HarnessMethod};
use super::run::{ConditionTrace, ResultRecord, Status};
use super::summarize::SummaryRow;
use super::HarnessError;

pub const RESULTS_HEADER: [&str; 12] =
    ["L", "mech", "pm", "method", "nc", "rep", "estimand", "estimate", "ci_lower", "ci_upper", "truth", "status"];
pub const SUMMARY_HEADER: [&str; 10] = ["L", "mech", "pm", "method", "nc", "estimand", "prb", "ciw", "cic", "n_ok"];
pub const TRACES_HEADER: [&str; 11] =
    ["L", "mech", "pm", "method", "nc", "rep", "chain", "iteration", "variable", "mean", "sd"];

/// 17 significant digits; non-finite or absent values become empty fields.
pub fn format_float(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        _ => String::new(),
    }
}

fn parse_float(s: &str) -> Result<Option<f64>, HarnessError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| HarnessError::Parse(format!("bad number '{s}'")))
}

fn condition_fields(c: &Condition) -> [String; 5] {
    [c.l.to_string(), c.mech.label().to_string(), c.pm.to_string(), c.method.label().to_string(), c.nc.to_string()]
}

fn parse_condition(f: &csv::StringRecord) -> Result<Condition, HarnessError> {
    let bad = |what: &str, v: &str| HarnessError::Parse(format!("bad {what} '{v}'"));
    let int = |k: usize, what: &str| f[k].parse::<usize>().map_err(|_| bad(what, &f[k]));
    Ok(Condition {
        l: int(0, "L")?,
        mech: Mechanism::parse(&f[1]).ok_or_else(|| bad("mechanism", &f[1]))?,
        pm: f[2].parse().map_err(|_| bad("pm", &f[2]))?,
        method: HarnessMethod::parse(&f[3]).ok_or_else(|| bad("method", &f[3]))?,
        nc: int(4, "nc")?,
    })
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), HarnessError> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(HarnessError::Parse(format!("unexpected header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(())
}

pub fn write_results<W: Write>(records: &[ResultRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        let mut row: Vec<String> = condition_fields(&r.condition).into();
        row.extend([
            r.rep.to_string(),
            r.estimand.to_string(),
            format_float(r.estimate),
            format_float(r.ci_lower),
            format_float(r.ci_upper),
            format_float(Some(r.truth)),
            r.status.label(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRecord>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &RESULTS_HEADER)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let f = row?;
        if f.len() != RESULTS_HEADER.len() {
            return Err(HarnessError::Parse(format!("expected {} fields, got {}", RESULTS_HEADER.len(), f.len())));
        }
        out.push(ResultRecord {
            condition: parse_condition(&f)?,
            rep: f[5].parse().map_err(|_| HarnessError::Parse(format!("bad rep '{}'", &f[5])))?,
            estimand: Estimand::parse(&f[6]).map_err(|e| HarnessError::Parse(e.to_string()))?,
            estimate: parse_float(&f[7])?,
            ci_lower: parse_float(&f[8])?,
            ci_upper: parse_float(&f[9])?,
            truth: parse_float(&f[10])?.unwrap_or(f64::NAN),
            status: Status::parse(&f[11]).ok_or_else(|| HarnessError::Parse(format!("bad status '{}'", &f[11])))?,
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let mut row: Vec<String> = condition_fields(&r.condition).into();
        row.extend([
            r.estimand.to_string(),
            format_float(r.prb),
            format_float(r.ciw),
            format_float(r.cic),
            r.n_ok.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &SUMMARY_HEADER)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let f = row?;
        out.push(SummaryRow {
            condition: parse_condition(&f)?,
            estimand: Estimand::parse(&f[5]).map_err(|e| HarnessError::Parse(e.to_string()))?,
            prb: parse_float(&f[6])?,
            ciw: parse_float(&f[7])?,
            cic: parse_float(&f[8])?,
            n_ok: f[9].parse().map_err(|_| HarnessError::Parse(format!("bad n_ok '{}'", &f[9])))?,
        });
    }
    Ok(out)
}

pub fn write_traces<W: Write>(traces: &[ConditionTrace], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACES_HEADER)?;
    for t in traces {
        for r in &t.rows {
            let mut row: Vec<String> = condition_fields(&t.condition).into();
            row.extend([
                t.rep.to_string(),
                r.chain.to_string(),
                r.iteration.to_string(),
                format!("z{}", r.variable + 1),
                format_float(Some(r.mean)),
                format_float(Some(r.sd)),
            ]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub condition: Condition,
    pub rep: usize,
    pub chain: usize,
    pub iteration: usize,
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
}

pub fn read_traces<R: Read>(input: R) -> Result<Vec<TraceRecord>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &TRACES_HEADER)?;
    let mut out = Vec::new();
    let int = |s: &str| s.parse::<usize>().map_err(|_| HarnessError::Parse(format!("bad integer '{s}'")));
    for row in reader.records() {
        let f = row?;
        out.push(TraceRecord {
            condition: parse_condition(&f)?,
            rep: int(&f[5])?,
            chain: int(&f[6])?,
            iteration: int(&f[7])?,
            variable: f[8].to_string(),
            mean: parse_float(&f[9])?.unwrap_or(f64::NAN),
            sd: parse_float(&f[10])?.unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}

/// Chain-mixing view of a trace: for each condition, replication, variable
/// and iteration, the average and the between-chain spread of the chain means
/// and the average within-chain sd.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub condition: Condition,
    pub rep: usize,
    pub variable: String,
    pub iteration: usize,
    pub mean_of_means: f64,
    pub sd_of_means: f64,
    pub mean_sd: f64,
}

pub fn summarize_traces(records: &[TraceRecord]) -> Vec<TraceSummary> {
    type Key = (usize, Mechanism, u64, HarnessMethod, usize, usize, String, usize);
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut groups: Vec<(&TraceRecord, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in records {
        let c = &r.condition;
        let key = (c.l, c.mech, c.pm.to_bits(), c.method, c.nc, r.rep, r.variable.clone(), r.iteration);
        let k = *index.entry(key).or_insert_with(|| {
            groups.push((r, Vec::new(), Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(r.mean);
        groups[k].2.push(r.sd);
    }
    groups
        .into_iter()
        .map(|(r, means, sds)| TraceSummary {
            condition: r.condition,
            rep: r.rep,
            variable: r.variable.clone(),
            iteration: r.iteration,
            mean_of_means: mean(&means),
            sd_of_means: if means.len() > 1 { variance(&means).sqrt() } else { 0.0 },
            mean_sd: mean(&sds),
        })
        .collect()
}

pub fn write_trace_summary<W: Write>(rows: &[TraceSummary], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "L", "mech", "pm", "method", "nc", "rep", "variable", "iteration", "mean_of_means", "sd_of_means", "mean_sd",
    ])?;
    for r in rows {
        let mut row: Vec<String> = condition_fields(&r.condition).into();
        row.extend([
            r.rep.to_string(),
            r.variable.clone(),
            r.iteration.to_string(),
            format_float(Some(r.mean_of_means)),
            format_float(Some(r.sd_of_means)),
            format_float(Some(r.mean_sd)),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
