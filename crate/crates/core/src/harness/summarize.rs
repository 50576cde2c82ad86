use std::collections::HashMap;

use crate::amputation::Mechanism;
use crate::analysis::{cic, ciw, prb, Estimand};

use super::grid::{Condition, HarnessMethod};
use super::run::ResultRecord;

/// Bias, width and coverage of one estimand in one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub condition: Condition,
    pub estimand: Estimand,
    pub prb: Option<f64>,
    pub ciw: Option<f64>,
    pub cic: Option<f64>,
    /// Replications that produced an estimate.
    pub n_ok: usize,
}

type CellKey = (usize, Mechanism, u64, HarnessMethod, usize, Estimand);

fn cell_key(r: &ResultRecord) -> CellKey {
    let c = &r.condition;
    (c.l, c.mech, c.pm.to_bits(), c.method, c.nc, r.estimand)
}

/// Aggregate records per (condition, estimand), in order of first appearance.
/// The truth is the mean full-data estimate over every replication of the
/// cell; the metrics use only the successful replications. Cells without a
/// successful replication get empty metrics.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut index: HashMap<CellKey, usize> = HashMap::new();
    let mut cells: Vec<Vec<&ResultRecord>> = Vec::new();
    for r in records {
        let k = *index.entry(cell_key(r)).or_insert_with(|| {
            cells.push(Vec::new());
            cells.len() - 1
        });
        cells[k].push(r);
    }
    cells
        .into_iter()
        .map(|cell| {
            let truth = cell.iter().map(|r| r.truth).sum::<f64>() / cell.len() as f64;
            let ok: Vec<&&ResultRecord> = cell.iter().filter(|r| r.status.is_ok()).collect();
            let points: Vec<f64> = ok.iter().filter_map(|r| r.estimate).collect();
            let intervals: Vec<(f64, f64)> =
                ok.iter().filter_map(|r| Some((r.ci_lower?, r.ci_upper?))).collect();
            SummaryRow {
                condition: cell[0].condition,
                estimand: cell[0].estimand,
                prb: prb(&points, truth).ok().filter(|v| v.is_finite()),
                ciw: ciw(&intervals).ok(),
                cic: if truth.is_finite() { cic(&intervals, truth).ok() } else { None },
                n_ok: ok.len(),
            }
        })
        .collect()
}
