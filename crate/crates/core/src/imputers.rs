//! Univariate imputation methods.
//!
//! Every method draws imputations for the missing rows of one target column
//! given a fully completed predictor matrix (the current chain state). Model
//! uncertainty comes from a bootstrap of the observed rows, followed by
//! normal noise scaled by the bootstrap residual variance.
//!
//! The component-based methods standardize the bootstrap predictors, scale
//! the missing-row predictors with the bootstrap statistics and centre the
//! bootstrap target before fitting. Predictor columns that are constant in a
//! bootstrap sample are dropped for that draw.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::data::DataMatrix;
use crate::dimred::{
    self, alpha_ml_from_svd, cv_select_threshold, fit_pcovr_from_svd, fit_pcr, fit_pls, is_constant,
    DimredError, DEFAULT_CV_FOLDS,
};
use crate::linalg::{column_means_sds, correlation, ols, ThinSvd};
use crate::SimRng;

/// Bootstrap attempts for the normal linear model before giving up.
pub const MAX_BOOTSTRAP_ATTEMPTS: usize = 25;

pub const DEFAULT_QP_THRESHOLD: f64 = 0.1;

/// Thresholds `0.05, 0.10, ..., 0.95`.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Which univariate method to use, with its method-specific settings.
#[derive(Debug, Clone, PartialEq)]
pub enum ImputerSpec {
    Pcr { n_components: usize },
    Spcr { n_components: usize, threshold_grid: Vec<f64>, cv_folds: usize },
    Pcovr { n_components: usize },
    Plsr { n_components: usize },
    /// Normal linear model on all other columns.
    All,
    /// Normal linear model on quickpred-selected columns; falls back to the
    /// analysis-model columns when nothing is selected.
    Qp { threshold: f64, am_columns: Vec<usize> },
    /// Normal linear model on the other analysis-model columns.
    Am { columns: Vec<usize> },
}

impl ImputerSpec {
    pub fn spcr(n_components: usize) -> Self {
        ImputerSpec::Spcr {
            n_components,
            threshold_grid: default_threshold_grid(),
            cv_folds: DEFAULT_CV_FOLDS,
        }
    }

    pub fn n_components(&self) -> Option<usize> {
        match self {
            ImputerSpec::Pcr { n_components }
            | ImputerSpec::Spcr { n_components, .. }
            | ImputerSpec::Pcovr { n_components }
            | ImputerSpec::Plsr { n_components } => Some(*n_components),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImputeError {
    #[error("{observed} observed values, at least {needed} required")]
    TooFewObserved { observed: usize, needed: usize },
    #[error("{requested} components requested but the predictors support only {available}")]
    InfeasibleComponents { requested: usize, available: usize },
    #[error("bootstrap design matrix singular in {attempts} attempts")]
    SingularDesign { attempts: usize },
    #[error("target has {target} rows but predictors have {rows}")]
    DimensionMismatch { target: usize, rows: usize },
    #[error(transparent)]
    Dimred(#[from] DimredError),
}

impl ImputeError {
    pub fn class(&self) -> &'static str {
        match self {
            ImputeError::TooFewObserved { .. } => "TooFewObserved",
            ImputeError::InfeasibleComponents { .. } => "InfeasibleComponents",
            ImputeError::SingularDesign { .. } => "SingularDesign",
            ImputeError::DimensionMismatch { .. } => "DimensionMismatch",
            ImputeError::Dimred(e) => e.class(),
        }
    }
}

/// Per-draw model diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DrawDiagnostics {
    pub residual_variance: Option<f64>,
    /// Selected screening threshold (SPCR).
    pub threshold: Option<f64>,
    /// Weighting parameter (PCovR).
    pub alpha: Option<f64>,
    /// Predictors entering the components after screening (SPCR).
    pub active_set_size: Option<usize>,
    /// Predictors available to the model in this draw.
    pub n_predictors: usize,
    /// Predictor columns dropped because the bootstrap made them constant.
    pub dropped_constant: usize,
    /// First weight vector over the kept predictors (PLSR).
    pub first_weight: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationDraw {
    /// One value per missing row of the target, in row order.
    pub values: Vec<f64>,
    pub diagnostics: DrawDiagnostics,
}

impl ImputationDraw {
    fn empty() -> Self {
        ImputationDraw { values: Vec::new(), diagnostics: DrawDiagnostics::default() }
    }
}

/// A univariate imputation model as seen by the chained-equations engine.
pub trait UnivariateImputer: Send + Sync {
    /// Draw imputations for the rows of column `target` flagged in `missing`,
    /// reading predictors from `completed`.
    fn impute(
        &self,
        completed: &DMatrix<f64>,
        target: usize,
        missing: &[bool],
        rng: &mut SimRng,
    ) -> Result<ImputationDraw, ImputeError>;
}

struct Bootstrap {
    x_obs: DMatrix<f64>,
    y_obs: DVector<f64>,
    x_mis: DMatrix<f64>,
    /// Predictor columns kept (indices into the original predictor matrix).
    kept: Vec<usize>,
    dropped: usize,
}

fn split_rows(missing: &[bool]) -> (Vec<usize>, Vec<usize>) {
    (0..missing.len()).partition(|&i| !missing[i])
}

fn check_shapes(target: &DVector<f64>, missing: &[bool], predictors: &DMatrix<f64>) -> Result<(), ImputeError> {
    if target.len() != predictors.nrows() || missing.len() != target.len() {
        return Err(ImputeError::DimensionMismatch { target: target.len(), rows: predictors.nrows() });
    }
    Ok(())
}

fn bootstrap_rows<R: Rng + ?Sized>(obs: &[usize], rng: &mut R) -> Vec<usize> {
    (0..obs.len()).map(|_| obs[rng.random_range(0..obs.len())]).collect()
}

fn bootstrap<R: Rng + ?Sized>(
    target: &DVector<f64>,
    predictors: &DMatrix<f64>,
    obs: &[usize],
    mis: &[usize],
    rng: &mut R,
) -> Bootstrap {
    let rows = bootstrap_rows(obs, rng);
    let x_obs = predictors.select_rows(rows.iter());
    let y_obs = DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i]));
    let (means, sds) = column_means_sds(&x_obs);
    let kept: Vec<usize> = (0..x_obs.ncols()).filter(|&j| !is_constant(means[j], sds[j])).collect();
    let dropped = x_obs.ncols() - kept.len();
    let x_mis = predictors.select_rows(mis.iter());
    if dropped == 0 {
        Bootstrap { x_obs, y_obs, x_mis, kept, dropped }
    } else {
        Bootstrap {
            x_obs: x_obs.select_columns(kept.iter()),
            y_obs,
            x_mis: x_mis.select_columns(kept.iter()),
            kept,
            dropped,
        }
    }
}

/// Standardized bootstrap predictors, scaled missing-row predictors, centred
/// outcome and its mean.
struct Prepared {
    x: DMatrix<f64>,
    x_mis: DMatrix<f64>,
    y: DVector<f64>,
    y_mean: f64,
}

impl Bootstrap {
    fn prepare(&self) -> Result<Prepared, ImputeError> {
        let (x, stats) = dimred::standardize(&self.x_obs)?;
        let x_mis = stats.apply(&self.x_mis);
        let y_mean = self.y_obs.mean();
        Ok(Prepared { x, x_mis, y: self.y_obs.add_scalar(-y_mean), y_mean })
    }
}

fn check_components(q: usize, n_obs: usize, p_kept: usize) -> Result<(), ImputeError> {
    if n_obs < q + 2 {
        return Err(ImputeError::TooFewObserved { observed: n_obs, needed: q + 2 });
    }
    let available = p_kept.min(n_obs - 1);
    if q == 0 || q > available {
        return Err(ImputeError::InfeasibleComponents { requested: q, available });
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(pred: &DVector<f64>, mean: f64, sigma2: f64, rng: &mut R) -> Vec<f64> {
    let sd = sigma2.max(0.0).sqrt();
    pred.iter()
        .map(|p| {
            let z: f64 = rng.sample(StandardNormal);
            p + mean + sd * z
        })
        .collect()
}

/// Common entry checks. Returns observed and missing row indices, or `None`
/// when there is nothing to impute.
fn begin(
    target: &DVector<f64>,
    missing: &[bool],
    predictors: &DMatrix<f64>,
    q: usize,
) -> Result<Option<(Vec<usize>, Vec<usize>)>, ImputeError> {
    check_shapes(target, missing, predictors)?;
    let (obs, mis) = split_rows(missing);
    if mis.is_empty() {
        return Ok(None);
    }
    check_components(q, obs.len(), predictors.ncols())?;
    Ok(Some((obs, mis)))
}

/// Imputation under the PCR model with bootstrap.
pub fn impute_pcr(
    target: &DVector<f64>,
    missing: &[bool],
    predictors: &DMatrix<f64>,
    q: usize,
    rng: &mut SimRng,
) -> Result<ImputationDraw, ImputeError> {
    let Some((obs, mis)) = begin(target, missing, predictors, q)? else {
        return Ok(ImputationDraw::empty());
    };
    let boot = bootstrap(target, predictors, &obs, &mis, rng);
    check_components(q, obs.len(), boot.kept.len())?;
    let prep = boot.prepare()?;
    let model = fit_pcr(&prep.x, &prep.y, q)?;
    let sigma2 = model.residual_variance.unwrap_or(0.0);
    let pred = model.predict_centered(&prep.x_mis).expect("pcr has coefficients");
    Ok(ImputationDraw {
        values: add_noise(&pred, prep.y_mean, sigma2, rng),
        diagnostics: DrawDiagnostics {
            residual_variance: Some(sigma2),
            n_predictors: boot.kept.len(),
            dropped_constant: boot.dropped,
            ..Default::default()
        },
    })
}

/// Imputation under the SPCR model with bootstrap: correlation screening with
/// a cross-validated threshold, then PCR on the retained predictors.
pub fn impute_spcr(
    target: &DVector<f64>,
    missing: &[bool],
    predictors: &DMatrix<f64>,
    q: usize,
    grid: &[f64],
    folds: usize,
    rng: &mut SimRng,
) -> Result<ImputationDraw, ImputeError> {
    let Some((obs, mis)) = begin(target, missing, predictors, q)? else {
        return Ok(ImputationDraw::empty());
    };
    let boot = bootstrap(target, predictors, &obs, &mis, rng);
    check_components(q, obs.len(), boot.kept.len())?;
    let prep = boot.prepare()?;
    let selection = cv_select_threshold(&prep.x, &prep.y, q, grid, folds, rng)?;
    let active = &selection.active_set;
    let x_active = prep.x.select_columns(active.iter());
    let mut model = fit_pcr(&x_active, &prep.y, q)?;
    model.selected_threshold = Some(selection.threshold);
    let sigma2 = model.residual_variance.unwrap_or(0.0);
    let pred = model
        .predict_centered(&prep.x_mis.select_columns(active.iter()))
        .expect("pcr has coefficients");
    Ok(ImputationDraw {
        values: add_noise(&pred, prep.y_mean, sigma2, rng),
        diagnostics: DrawDiagnostics {
            residual_variance: Some(sigma2),
            threshold: Some(selection.threshold),
            active_set_size: Some(active.len()),
            n_predictors: boot.kept.len(),
            dropped_constant: boot.dropped,
            ..Default::default()
        },
    })
}

/// Imputation under the PCovR model with bootstrap; the weighting parameter
/// is re-estimated on every bootstrap sample.
pub fn impute_pcovr(
    target: &DVector<f64>,
    missing: &[bool],
    predictors: &DMatrix<f64>,
    q: usize,
    rng: &mut SimRng,
) -> Result<ImputationDraw, ImputeError> {
    let Some((obs, mis)) = begin(target, missing, predictors, q)? else {
        return Ok(ImputationDraw::empty());
    };
    let boot = bootstrap(target, predictors, &obs, &mis, rng);
    check_components(q, obs.len(), boot.kept.len())?;
    let prep = boot.prepare()?;
    let svd = ThinSvd::new(&prep.x);
    let alpha = alpha_ml_from_svd(&prep.x, &prep.y, &svd, q)?;
    let model = fit_pcovr_from_svd(&prep.x, &prep.y, &svd, q, alpha.alpha)?;
    let sigma2 = model.residual_variance.unwrap_or(0.0);
    let pred = model.predict_centered(&prep.x_mis).expect("pcovr has coefficients");
    Ok(ImputationDraw {
        values: add_noise(&pred, prep.y_mean, sigma2, rng),
        diagnostics: DrawDiagnostics {
            residual_variance: Some(sigma2),
            alpha: Some(alpha.alpha),
            n_predictors: boot.kept.len(),
            dropped_constant: boot.dropped,
            ..Default::default()
        },
    })
}

/// Imputation under the PLSR model with bootstrap.
pub fn impute_plsr(
    target: &DVector<f64>,
    missing: &[bool],
    predictors: &DMatrix<f64>,
    q: usize,
    rng: &mut SimRng,
) -> Result<ImputationDraw, ImputeError> {
    let Some((obs, mis)) = begin(target, missing, predictors, q)? else {
        return Ok(ImputationDraw::empty());
    };
    let boot = bootstrap(target, predictors, &obs, &mis, rng);
    check_components(q, obs.len(), boot.kept.len())?;
    let prep = boot.prepare()?;
    let model = fit_pls(&prep.x, &prep.y, q)?;
    let sigma2 = model.residual_variance.unwrap_or(0.0);
    let pred = model.predict_centered(&prep.x_mis).expect("pls has coefficients");
    Ok(ImputationDraw {
        values: add_noise(&pred, prep.y_mean, sigma2, rng),
        diagnostics: DrawDiagnostics {
            residual_variance: Some(sigma2),
            n_predictors: boot.kept.len(),
            dropped_constant: boot.dropped,
            first_weight: Some(model.weights.column(0).iter().copied().collect()),
            ..Default::default()
        },
    })
}

/// Imputation under the normal linear model with bootstrap (intercept plus
/// all columns of `predictors`). `σ² = RSS / (N_obs − p − 1)`.
pub fn impute_normlinear(
    target: &DVector<f64>,
    missing: &[bool],
    predictors: &DMatrix<f64>,
    rng: &mut SimRng,
) -> Result<ImputationDraw, ImputeError> {
    check_shapes(target, missing, predictors)?;
    let (obs, mis) = split_rows(missing);
    if mis.is_empty() {
        return Ok(ImputationDraw::empty());
    }
    let p = predictors.ncols();
    if obs.len() < p + 2 {
        return Err(ImputeError::TooFewObserved { observed: obs.len(), needed: p + 2 });
    }
    let with_intercept = |x: DMatrix<f64>| x.insert_column(0, 1.0);
    let x_mis = with_intercept(predictors.select_rows(mis.iter()));
    for _ in 0..MAX_BOOTSTRAP_ATTEMPTS {
        let rows = bootstrap_rows(&obs, rng);
        let design = with_intercept(predictors.select_rows(rows.iter()));
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i]));
        let Some(fit) = ols(&design, &y) else { continue };
        let sigma2 = fit.rss / (rows.len() - p - 1) as f64;
        let pred = &x_mis * &fit.coefficients;
        return Ok(ImputationDraw {
            values: add_noise(&pred, 0.0, sigma2, rng),
            diagnostics: DrawDiagnostics {
                residual_variance: Some(sigma2),
                n_predictors: p,
                ..Default::default()
            },
        });
    }
    Err(ImputeError::SingularDesign { attempts: MAX_BOOTSTRAP_ATTEMPTS })
}

/// Quickpred-style predictor selection for `target`: columns whose absolute
/// pairwise-complete correlation with the target, or with the target's
/// missingness indicator, exceeds `threshold`.
pub fn quickpred_select(data: &DataMatrix, target: usize, threshold: f64) -> Vec<usize> {
    let values = data.values();
    let target_mask = data.column_mask(target);
    let has_missing = target_mask.iter().any(|&m| m);
    (0..data.n_cols())
        .filter(|&k| k != target)
        .filter(|&k| {
            let k_mask = data.column_mask(k);
            let both: Vec<usize> = (0..data.n_rows()).filter(|&i| !k_mask[i] && !target_mask[i]).collect();
            let r_value = if both.len() >= 2 {
                let a: Vec<f64> = both.iter().map(|&i| values[(i, target)]).collect();
                let b: Vec<f64> = both.iter().map(|&i| values[(i, k)]).collect();
                correlation(&a, &b)
            } else {
                0.0
            };
            if r_value.abs() > threshold {
                return true;
            }
            if !has_missing {
                return false;
            }
            let obs_k: Vec<usize> = (0..data.n_rows()).filter(|&i| !k_mask[i]).collect();
            let ind: Vec<f64> = obs_k.iter().map(|&i| if target_mask[i] { 1.0 } else { 0.0 }).collect();
            let col: Vec<f64> = obs_k.iter().map(|&i| values[(i, k)]).collect();
            obs_k.len() >= 2 && correlation(&ind, &col).abs() > threshold
        })
        .collect()
}

/// Dispatches an [`ImputerSpec`] against the chain state, choosing the
/// predictor columns for each target.
#[derive(Debug, Clone)]
pub struct MethodImputer {
    spec: ImputerSpec,
    /// Per-column predictor sets for subset-based methods; `None` means all
    /// other columns.
    predictor_sets: Vec<Option<Vec<usize>>>,
}

impl MethodImputer {
    /// Resolve predictor sets against the incomplete data. Quickpred selection
    /// is computed once, from the observed values.
    pub fn new(spec: ImputerSpec, data: &DataMatrix) -> Self {
        let p = data.n_cols();
        let predictor_sets = (0..p)
            .map(|j| match &spec {
                ImputerSpec::Am { columns } => Some(others(columns, j)),
                ImputerSpec::Qp { threshold, am_columns } => {
                    let sel = quickpred_select(data, j, *threshold);
                    Some(if sel.is_empty() { others(am_columns, j) } else { sel })
                }
                _ => None,
            })
            .collect();
        MethodImputer { spec, predictor_sets }
    }

    pub fn spec(&self) -> &ImputerSpec {
        &self.spec
    }

    pub fn predictors_for(&self, target: usize, n_cols: usize) -> Vec<usize> {
        match self.predictor_sets.get(target).cloned().flatten() {
            Some(set) => set,
            None => (0..n_cols).filter(|&k| k != target).collect(),
        }
    }
}

fn others(columns: &[usize], target: usize) -> Vec<usize> {
    columns.iter().copied().filter(|&k| k != target).collect()
}

impl UnivariateImputer for MethodImputer {
    fn impute(
        &self,
        completed: &DMatrix<f64>,
        target: usize,
        missing: &[bool],
        rng: &mut SimRng,
    ) -> Result<ImputationDraw, ImputeError> {
        let cols = self.predictors_for(target, completed.ncols());
        let x = completed.select_columns(cols.iter());
        let y = completed.column(target).into_owned();
        match &self.spec {
            ImputerSpec::Pcr { n_components } => impute_pcr(&y, missing, &x, *n_components, rng),
            ImputerSpec::Spcr { n_components, threshold_grid, cv_folds } => {
                impute_spcr(&y, missing, &x, *n_components, threshold_grid, *cv_folds, rng)
            }
            ImputerSpec::Pcovr { n_components } => impute_pcovr(&y, missing, &x, *n_components, rng),
            ImputerSpec::Plsr { n_components } => impute_plsr(&y, missing, &x, *n_components, rng),
            ImputerSpec::All | ImputerSpec::Qp { .. } | ImputerSpec::Am { .. } => {
                impute_normlinear(&y, missing, &x, rng)
            }
        }
    }
}
