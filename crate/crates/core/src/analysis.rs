//! Per-dataset estimators, Rubin's combining rules and the bias, width and
//! coverage summaries over replications.

use std::fmt;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

pub const DEFAULT_LEVEL: f64 = 0.95;
const FISHER_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("at least 4 rows are required, got {rows}")]
    DegenerateSample { rows: usize },
    #[error("truth is zero; absolute bias is {abs_bias}")]
    ZeroTruth { abs_bias: f64 },
    #[error("no estimates to combine")]
    Empty,
    #[error("column {column} out of range for {n_cols} columns")]
    ColumnOutOfRange { column: usize, n_cols: usize },
    #[error("cannot parse estimand '{0}'")]
    Parse(String),
}

impl AnalysisError {
    pub fn class(&self) -> &'static str {
        match self {
            AnalysisError::DegenerateSample { .. } => "DegenerateSample",
            AnalysisError::ZeroTruth { .. } => "ZeroTruth",
            AnalysisError::Empty => "Empty",
            AnalysisError::ColumnOutOfRange { .. } => "ColumnOutOfRange",
            AnalysisError::Parse(_) => "Parse",
        }
    }
}

/// A population quantity of one or two columns (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimand {
    Mean(usize),
    Variance(usize),
    Covariance(usize, usize),
    Correlation(usize, usize),
}

impl Estimand {
    pub fn columns(&self) -> Vec<usize> {
        match *self {
            Estimand::Mean(a) | Estimand::Variance(a) => vec![a],
            Estimand::Covariance(a, b) | Estimand::Correlation(a, b) => vec![a, b],
        }
    }

    pub fn scale(&self) -> Scale {
        match self {
            Estimand::Correlation(..) => Scale::FisherZ,
            _ => Scale::Identity,
        }
    }

    /// Parse labels such as `mean(z1)` or `cor(z1,z2)`.
    pub fn parse(s: &str) -> Result<Self, AnalysisError> {
        let err = || AnalysisError::Parse(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(err)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(err)?;
        let col = |t: &str| -> Result<usize, AnalysisError> {
            let k: usize = t.trim().strip_prefix('z').ok_or_else(err)?.parse().map_err(|_| err())?;
            k.checked_sub(1).ok_or_else(err)
        };
        let args: Vec<&str> = inner.split(',').collect();
        match (&s[..open], args.as_slice()) {
            ("mean", [a]) => Ok(Estimand::Mean(col(a)?)),
            ("var", [a]) => Ok(Estimand::Variance(col(a)?)),
            ("cov", [a, b]) => Ok(Estimand::Covariance(col(a)?, col(b)?)),
            ("cor", [a, b]) => Ok(Estimand::Correlation(col(a)?, col(b)?)),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Estimand::Mean(a) => write!(f, "mean(z{})", a + 1),
            Estimand::Variance(a) => write!(f, "var(z{})", a + 1),
            Estimand::Covariance(a, b) => write!(f, "cov(z{},z{})", a + 1, b + 1),
            Estimand::Correlation(a, b) => write!(f, "cor(z{},z{})", a + 1, b + 1),
        }
    }
}

/// Means, variances, covariances and correlations of `columns`, in that order.
pub fn standard_estimands(columns: &[usize]) -> Vec<Estimand> {
    let pairs: Vec<(usize, usize)> =
        columns.iter().enumerate().flat_map(|(k, &a)| columns[k + 1..].iter().map(move |&b| (a, b))).collect();
    let mut out: Vec<Estimand> = columns.iter().map(|&a| Estimand::Mean(a)).collect();
    out.extend(columns.iter().map(|&a| Estimand::Variance(a)));
    out.extend(pairs.iter().map(|&(a, b)| Estimand::Covariance(a, b)));
    out.extend(pairs.iter().map(|&(a, b)| Estimand::Correlation(a, b)));
    out
}

/// Scale on which an estimate is approximately normal and pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Identity,
    FisherZ,
}

impl Scale {
    pub fn to_natural(self, v: f64) -> f64 {
        match self {
            Scale::Identity => v,
            Scale::FisherZ => v.tanh(),
        }
    }
}

/// Point estimate and standard error on the estimand's pooling scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub point: f64,
    pub se: f64,
    pub scale: Scale,
}

fn centered(data: &DMatrix<f64>, j: usize) -> (f64, Vec<f64>) {
    let col = data.column(j);
    let m = col.mean();
    (m, col.iter().map(|v| v - m).collect())
}

/// Estimate `estimand` from a complete data matrix.
pub fn estimate(data: &DMatrix<f64>, estimand: Estimand) -> Result<Estimate, AnalysisError> {
    let n = data.nrows();
    if n < 4 {
        return Err(AnalysisError::DegenerateSample { rows: n });
    }
    for c in estimand.columns() {
        if c >= data.ncols() {
            return Err(AnalysisError::ColumnOutOfRange { column: c, n_cols: data.ncols() });
        }
    }
    let nf = n as f64;
    let ss = |d: &[f64]| d.iter().map(|v| v * v).sum::<f64>();
    let cross = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (point, se, scale) = match estimand {
        Estimand::Mean(a) => {
            let (m, d) = centered(data, a);
            let var = ss(&d) / (nf - 1.0);
            (m, (var / nf).sqrt(), Scale::Identity)
        }
        Estimand::Variance(a) => {
            let (_, d) = centered(data, a);
            let var = ss(&d) / (nf - 1.0);
            (var, var * (2.0 / (nf - 1.0)).sqrt(), Scale::Identity)
        }
        Estimand::Covariance(a, b) => {
            let (_, da) = centered(data, a);
            let (_, db) = centered(data, b);
            let cov = cross(&da, &db) / (nf - 1.0);
            let m22 = da.iter().zip(&db).map(|(x, y)| (x * y).powi(2)).sum::<f64>() / nf;
            (cov, ((m22 - cov * cov).max(0.0) / nf).sqrt(), Scale::Identity)
        }
        Estimand::Correlation(a, b) => {
            let (_, da) = centered(data, a);
            let (_, db) = centered(data, b);
            let denom = (ss(&da) * ss(&db)).sqrt();
            let r = if denom > 0.0 { cross(&da, &db) / denom } else { 0.0 };
            let z = r.clamp(-FISHER_CLAMP, FISHER_CLAMP).atanh();
            (z, 1.0 / (nf - 3.0).sqrt(), Scale::FisherZ)
        }
    };
    Ok(Estimate { point, se, scale })
}

/// Degrees-of-freedom rule for the pooled interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DfMethod {
    Rubin,
    /// Small-sample adjustment given the complete-data degrees of freedom.
    BarnardRubin { complete_df: f64 },
}

/// Combined inference over `d` completed datasets. `within`, `between`,
/// `total` and `df` are on the pooling scale; `point` and the interval are on
/// the natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEstimate {
    pub point: f64,
    pub within: f64,
    pub between: f64,
    pub total: f64,
    pub df: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    pub n_imputations: usize,
}

fn critical_value(df: f64, level: f64) -> f64 {
    let p = 0.5 + level / 2.0;
    if !df.is_finite() || df > 1e6 {
        Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
    } else {
        StudentsT::new(0.0, 1.0, df).expect("positive df").inverse_cdf(p)
    }
}

/// Rubin's rules with classic degrees of freedom and a 95% interval.
pub fn pool(estimates: &[Estimate]) -> Result<PooledEstimate, AnalysisError> {
    pool_with(estimates, DEFAULT_LEVEL, DfMethod::Rubin)
}

pub fn pool_with(estimates: &[Estimate], level: f64, df_method: DfMethod) -> Result<PooledEstimate, AnalysisError> {
    let d = estimates.len();
    if d == 0 {
        return Err(AnalysisError::Empty);
    }
    let scale = estimates[0].scale;
    let df_ = d as f64;
    let qbar = estimates.iter().map(|e| e.point).sum::<f64>() / df_;
    let ubar = estimates.iter().map(|e| e.se * e.se).sum::<f64>() / df_;
    let b = if d > 1 { estimates.iter().map(|e| (e.point - qbar).powi(2)).sum::<f64>() / (df_ - 1.0) } else { 0.0 };
    let inflated = (1.0 + 1.0 / df_) * b;
    let t = ubar + inflated;
    let df = if d == 1 || b == 0.0 {
        f64::INFINITY
    } else {
        let old = (df_ - 1.0) * (1.0 + ubar / inflated).powi(2);
        match df_method {
            DfMethod::Rubin => old,
            DfMethod::BarnardRubin { complete_df } => {
                let lambda = inflated / t;
                let obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - lambda);
                1.0 / (1.0 / old + 1.0 / obs)
            }
        }
    };
    let half = critical_value(df, level) * t.sqrt();
    Ok(PooledEstimate {
        point: scale.to_natural(qbar),
        within: ubar,
        between: b,
        total: t,
        df,
        ci_lower: scale.to_natural(qbar - half),
        ci_upper: scale.to_natural(qbar + half),
        level,
        n_imputations: d,
    })
}

/// Estimate on each completed dataset, then pool.
pub fn analyze(datasets: &[DMatrix<f64>], estimand: Estimand) -> Result<PooledEstimate, AnalysisError> {
    let ests = datasets.iter().map(|d| estimate(d, estimand)).collect::<Result<Vec<_>, _>>()?;
    pool(&ests)
}

/// Absolute percent relative bias of the mean of `points` against `truth`.
pub fn prb(points: &[f64], truth: f64) -> Result<f64, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mean = points.iter().sum::<f64>() / points.len() as f64;
    if truth == 0.0 {
        return Err(AnalysisError::ZeroTruth { abs_bias: mean.abs() });
    }
    Ok(((mean - truth) / truth).abs() * 100.0)
}

/// Average interval width.
pub fn ciw(intervals: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    if intervals.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(intervals.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / intervals.len() as f64)
}

/// Fraction of intervals containing `truth`, endpoints included.
pub fn cic(intervals: &[(f64, f64)], truth: f64) -> Result<f64, AnalysisError> {
    if intervals.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let covered = intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
    Ok(covered as f64 / intervals.len() as f64)
}
