//! Imposing MCAR or logistic MAR missingness on selected columns, plus the
//! separation diagnostics used to calibrate it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::data::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Mcar,
    Mar,
}

impl Mechanism {
    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MCAR" => Some(Mechanism::Mcar),
            "MAR" => Some(Mechanism::Mar),
            _ => None,
        }
    }
}

/// Which part of the predictor-score distribution is more likely to go missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Right,
    Left,
    Tails,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    /// Target proportion of missing cells per target column, in `[0, 1)`.
    pub pm: f64,
    pub targets: Vec<usize>,
    pub predictors: Vec<usize>,
    /// One location per target; ignored under MCAR.
    pub locations: Vec<Location>,
}

impl MissingnessSpec {
    /// Missingness on `z1..z3` driven by `z4..z6`, right/left/tails.
    pub fn standard(mechanism: Mechanism, pm: f64) -> Self {
        MissingnessSpec {
            mechanism,
            pm,
            targets: vec![0, 1, 2],
            predictors: vec![3, 4, 5],
            locations: vec![Location::Right, Location::Left, Location::Tails],
        }
    }

    fn validate(&self, n_cols: usize) -> Result<(), AmputeError> {
        let bad = |m: String| Err(AmputeError::InvalidSpec(m));
        if !(0.0..1.0).contains(&self.pm) {
            return bad(format!("pm {} outside [0, 1)", self.pm));
        }
        for (k, &t) in self.targets.iter().enumerate() {
            if t >= n_cols {
                return bad(format!("target column {t} out of range"));
            }
            if self.targets[..k].contains(&t) {
                return bad(format!("target column {t} repeated"));
            }
            if self.predictors.contains(&t) {
                return bad(format!("column {t} is both target and predictor"));
            }
        }
        if self.mechanism == Mechanism::Mar {
            if self.predictors.is_empty() {
                return bad("MAR needs at least one predictor column".into());
            }
            if let Some(&p) = self.predictors.iter().find(|&&p| p >= n_cols) {
                return bad(format!("predictor column {p} out of range"));
            }
            if self.locations.len() != self.targets.len() {
                return bad("one location per target is required".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmputeError {
    #[error("invalid missingness specification: {0}")]
    InvalidSpec(String),
    #[error("predictor column {0} has missing values")]
    IncompletePredictor(usize),
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Apply the mechanism in `spec`. Existing missing cells stay missing.
pub fn ampute<R: Rng + ?Sized>(data: &DataMatrix, spec: &MissingnessSpec, rng: &mut R) -> Result<DataMatrix, AmputeError> {
    match spec.mechanism {
        Mechanism::Mcar => ampute_mcar(data, spec, rng),
        Mechanism::Mar => ampute_mar(data, spec, rng),
    }
}

/// Mask each target cell independently with probability `pm`.
pub fn ampute_mcar<R: Rng + ?Sized>(data: &DataMatrix, spec: &MissingnessSpec, rng: &mut R) -> Result<DataMatrix, AmputeError> {
    spec.validate(data.n_cols())?;
    let mut out = data.clone();
    if spec.pm == 0.0 {
        return Ok(out);
    }
    for &t in &spec.targets {
        for i in 0..data.n_rows() {
            if rng.random::<f64>() < spec.pm {
                out.set_missing(i, t, true);
            }
        }
    }
    Ok(out)
}

/// Intercept `b` with `mean(logistic(b + eta)) = pm`, by bisection.
pub fn calibrate_intercept(eta: &[f64], pm: f64) -> f64 {
    assert!(pm > 0.0 && pm < 1.0, "pm must lie in (0, 1)");
    assert!(!eta.is_empty());
    let expected = |b: f64| eta.iter().map(|&e| logistic(b + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-20.0, 20.0);
    while expected(lo) > pm {
        lo *= 2.0;
    }
    while expected(hi) < pm {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < pm {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standardized score driving missingness for one location: the row sum of
/// the predictor columns, oriented or folded by `location`, scaled to mean 0
/// and variance 1.
pub fn mar_score(data: &DataMatrix, predictors: &[usize], location: Location) -> Vec<f64> {
    let x = data.values();
    let s: Vec<f64> = (0..data.n_rows()).map(|i| predictors.iter().map(|&p| x[(i, p)]).sum()).collect();
    let shaped: Vec<f64> = match location {
        Location::Right => s,
        Location::Left => s.iter().map(|v| -v).collect(),
        Location::Tails => {
            let m = median(&s);
            s.iter().map(|v| (v - m).abs()).collect()
        }
    };
    let n = shaped.len() as f64;
    let mean = shaped.iter().sum::<f64>() / n;
    let sd = (shaped.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd > 0.0 {
        shaped.iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; shaped.len()]
    }
}

/// Mask each target cell with probability `logistic(b + eta_i)`, where `eta`
/// is the target's [`mar_score`] and `b` is calibrated to `pm`.
pub fn ampute_mar<R: Rng + ?Sized>(data: &DataMatrix, spec: &MissingnessSpec, rng: &mut R) -> Result<DataMatrix, AmputeError> {
    spec.validate(data.n_cols())?;
    if let Some(&p) = spec.predictors.iter().find(|&&p| data.missing_count(p) > 0) {
        return Err(AmputeError::IncompletePredictor(p));
    }
    let mut out = data.clone();
    if spec.pm == 0.0 {
        return Ok(out);
    }
    for (&t, &loc) in spec.targets.iter().zip(&spec.locations) {
        let eta = mar_score(data, &spec.predictors, loc);
        let b = calibrate_intercept(&eta, spec.pm);
        for (i, &e) in eta.iter().enumerate() {
            if rng.random::<f64>() < logistic(b + e) {
                out.set_missing(i, t, true);
            }
        }
    }
    Ok(out)
}

/// Area under the ROC curve of `scores` for the positive class, with ties
/// counted as one half. `None` when either class is empty.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut m = k;
        while m + 1 < idx.len() && scores[idx[m + 1]] == scores[idx[k]] {
            m += 1;
        }
        let r = 0.5 * ((k + 1) + (m + 1)) as f64;
        for &i in &idx[k..=m] {
            ranks[i] = r;
        }
        k = m + 1;
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    Some((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Logistic regression fit by iteratively reweighted least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first.
    pub coefficients: DVector<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
}

impl LogisticFit {
    /// McFadden pseudo-R².
    pub fn mcfadden_r2(&self) -> f64 {
        1.0 - self.log_likelihood / self.null_log_likelihood
    }
}

fn bernoulli_loglik(p: &[f64], y: &[bool]) -> f64 {
    p.iter()
        .zip(y)
        .map(|(&pi, &yi)| {
            let pi = pi.clamp(1e-300, 1.0 - 1e-16);
            if yi {
                pi.ln()
            } else {
                (1.0 - pi).ln()
            }
        })
        .sum()
}

/// Regress `y` on the columns of `x` plus an intercept. `None` if either
/// outcome class is empty or the Newton step becomes singular.
pub fn logistic_regression(x: &DMatrix<f64>, y: &[bool]) -> Option<LogisticFit> {
    let n = x.nrows();
    assert_eq!(n, y.len());
    let n_pos = y.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == n {
        return None;
    }
    let design = DMatrix::from_fn(n, x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let yv = DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    let mut beta = DVector::zeros(design.ncols());
    let mut loglik = f64::NEG_INFINITY;
    for _ in 0..100 {
        let eta = &design * &beta;
        let p: Vec<f64> = eta.iter().map(|&e| logistic(e)).collect();
        let w = DVector::from_iterator(n, p.iter().map(|&pi| (pi * (1.0 - pi)).max(1e-12)));
        let resid = DVector::from_iterator(n, yv.iter().zip(&p).map(|(yi, pi)| yi - pi));
        let weighted = DMatrix::from_fn(n, design.ncols(), |i, j| design[(i, j)] * w[i]);
        let info = design.transpose() * weighted;
        let step = info.cholesky()?.solve(&(design.transpose() * resid));
        beta += &step;
        let p_new: Vec<f64> = (&design * &beta).iter().map(|&e| logistic(e)).collect();
        let ll = bernoulli_loglik(&p_new, y);
        let done = (ll - loglik).abs() < 1e-10 * (1.0 + ll.abs());
        loglik = ll;
        if done {
            break;
        }
    }
    let p0 = n_pos as f64 / n as f64;
    let null = n_pos as f64 * p0.ln() + (n - n_pos) as f64 * (1.0 - p0).ln();
    Some(LogisticFit { coefficients: beta, log_likelihood: loglik, null_log_likelihood: null })
}
