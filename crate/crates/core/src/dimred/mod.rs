//! Dimensionality-reduction estimators on fully observed matrices.
//!
//! All estimators take a standardized predictor matrix (columns with mean 0
//! and unit sample variance, see [`standardize`]) and, where supervised, a
//! mean-centred outcome. They return a [`ComponentModel`] whose scores are
//! `T = X[:, active_set] * weights`.
//!
//! Sign convention: each weight column is flipped so its largest-magnitude
//! entry is positive.

mod pca;
mod pcovr;
mod pls;
mod spcr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use pca::{fit_pca, fit_pcr};
pub use pcovr::{alpha_ml, fit_pcovr, pcovr_objective, AlphaMl, SIGMA_EY_FLOOR};
pub use pls::fit_pls;
pub use spcr::{
    cv_select_threshold, screen_predictors, CandidateScore, ThresholdSelection, DEFAULT_CV_FOLDS,
};

pub(crate) use pcovr::{alpha_ml_from_svd, fit_pcovr_from_svd};

/// Maximum absolute deviation tolerated for orthonormality checks.
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimredError {
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("{requested} components requested, valid range is 1..={max}")]
    InvalidComponents { requested: usize, max: usize },
    #[error("{requested} components requested but the matrix only supports {available}")]
    RankDeficient { requested: usize, available: usize },
    #[error("no residual degrees of freedom: {rows} rows for {df} model degrees of freedom")]
    DegenerateDof { rows: usize, df: usize },
    #[error("no threshold in the grid retains at least {needed} predictors")]
    NoFeasibleThreshold { needed: usize },
    #[error("deflated predictor matrix collapsed after {completed} components")]
    DeflationCollapse { completed: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl DimredError {
    /// Short stable name of the error class.
    pub fn class(&self) -> &'static str {
        match self {
            DimredError::ConstantColumn(_) => "ConstantColumn",
            DimredError::TooFewRows { .. } => "TooFewRows",
            DimredError::InvalidComponents { .. } => "InvalidComponents",
            DimredError::RankDeficient { .. } => "RankDeficient",
            DimredError::DegenerateDof { .. } => "DegenerateDof",
            DimredError::NoFeasibleThreshold { .. } => "NoFeasibleThreshold",
            DimredError::DeflationCollapse { .. } => "DeflationCollapse",
            DimredError::DimensionMismatch(_) => "DimensionMismatch",
            DimredError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

/// Per-column centring and scaling constants.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl StandardizationStats {
    /// Centre and scale `x` with these constants.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.sds[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        out
    }

    pub fn select(&self, columns: &[usize]) -> StandardizationStats {
        StandardizationStats {
            means: columns.iter().map(|&j| self.means[j]).collect(),
            sds: columns.iter().map(|&j| self.sds[j]).collect(),
        }
    }
}

/// Whether a column with this mean and standard deviation counts as constant.
pub(crate) fn is_constant(mean: f64, sd: f64) -> bool {
    !(sd > 1e-12 * mean.abs().max(1.0))
}

/// Centre each column and scale it to unit sample variance (`n - 1`).
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, StandardizationStats), DimredError> {
    if x.nrows() < 2 {
        return Err(DimredError::TooFewRows { needed: 2, got: x.nrows() });
    }
    let (means, sds) = crate::linalg::column_means_sds(x);
    if let Some(j) = (0..sds.len()).find(|&j| is_constant(means[j], sds[j])) {
        return Err(DimredError::ConstantColumn(j));
    }
    let stats = StandardizationStats { means, sds };
    Ok((stats.apply(x), stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Pca,
    Spcr,
    Pcovr,
    Pls,
}

/// A fitted component model.
///
/// `coefficients` always maps scores to the centred outcome, so predictions
/// for every kind are `X[:, active_set] * weights * coefficients`. For PCovR
/// they equal `outcome_loadings` (`P_y`); for PLS the weights are the
/// rotation `W (P'W)^-1`, so scores are computable from the undeflated `X`.
#[derive(Debug, Clone)]
pub struct ComponentModel {
    pub kind: ComponentKind,
    pub n_components: usize,
    /// Number of columns of the matrix the model was fitted against.
    pub n_predictors: usize,
    /// `|active_set| x Q`.
    pub weights: DMatrix<f64>,
    /// `|active_set| x Q` predictor loadings (`P_X`).
    pub loadings: DMatrix<f64>,
    /// `P_y`; absent for pure PCA.
    pub outcome_loadings: Option<DVector<f64>>,
    pub coefficients: Option<DVector<f64>>,
    pub residual_variance: Option<f64>,
    /// Score sums of squares `t_q' t_q` for PCA-type fits.
    pub eigenvalues: Option<DVector<f64>>,
    /// Filled in by callers that standardized the data themselves.
    pub stats: Option<StandardizationStats>,
    pub outcome_mean: f64,
    pub active_set: Vec<usize>,
    pub alpha: Option<f64>,
    pub selected_threshold: Option<f64>,
}

impl ComponentModel {
    /// Component scores for a standardized matrix with all `n_predictors` columns.
    pub fn scores(&self, x_std: &DMatrix<f64>) -> DMatrix<f64> {
        if self.active_set.len() == x_std.ncols() {
            x_std * &self.weights
        } else {
            x_std.select_columns(self.active_set.iter()) * &self.weights
        }
    }

    /// Centred-outcome predictions for a standardized matrix.
    pub fn predict_centered(&self, x_std: &DMatrix<f64>) -> Option<DVector<f64>> {
        let coef = self.coefficients.as_ref()?;
        Some(self.scores(x_std) * coef)
    }

    /// Predictions on the original scale: standardize `x` with the stored
    /// statistics and add back the outcome mean.
    pub fn predict(&self, x: &DMatrix<f64>) -> Option<DVector<f64>> {
        let stats = self.stats.as_ref()?;
        let mut pred = self.predict_centered(&stats.apply(x))?;
        pred.add_scalar_mut(self.outcome_mean);
        Some(pred)
    }
}

pub(crate) fn check_outcome(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), DimredError> {
    if x.nrows() != y.len() {
        return Err(DimredError::DimensionMismatch(format!(
            "{} predictor rows but outcome of length {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_components(q: usize, n: usize, p: usize) -> Result<(), DimredError> {
    let max = p.min(n.saturating_sub(1));
    if q == 0 || q > max {
        return Err(DimredError::InvalidComponents { requested: q, max });
    }
    Ok(())
}
