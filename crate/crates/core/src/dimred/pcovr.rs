//! Principal covariates regression.
//!
//! The criterion minimized over `T = XW` with `T'T = I` is the normalized
//! weighted reconstruction loss
//!
//! ```text
//! α ‖X − T P_X'‖² / ‖X‖² + (1 − α) ‖y − T P_y'‖² / ‖y‖²
//! ```
//!
//! whose minimizer is the top-`Q` eigenspace of
//! `G = α XX'/‖X‖² + (1 − α) ŷŷ'/‖y‖²`, `ŷ` being the projection of `y` on
//! the column space of `X`. `G` lives in that column space, so it is
//! diagonalized through the thin SVD `X = U S V'` as
//! `U [α S²/‖X‖² + (1 − α) (U'y)(U'y)'/‖y‖²] U'` without forming an `N x N`
//! matrix.

use nalgebra::{DMatrix, DVector};

use super::{check_outcome, ComponentKind, ComponentModel, DimredError};
use crate::linalg::{orient_columns, sym_eigen_desc, ThinSvd};

/// Floor applied to the outcome error variance in [`alpha_ml`].
pub const SIGMA_EY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMl {
    pub alpha: f64,
    /// Mean squared residual per entry of the `Q`-component PCA of `X`.
    pub x_error_variance: f64,
    /// Mean squared residual of the least-squares regression of `y` on `X`.
    pub y_error_variance: f64,
    /// True when the outcome error variance was raised to [`SIGMA_EY_FLOOR`].
    pub floored: bool,
}

/// Maximum-likelihood based weighting parameter
/// `α = ‖X‖² / (‖X‖² + ‖y‖² σ²_EX / σ²_ey)`.
pub fn alpha_ml(x_std: &DMatrix<f64>, y_centered: &DVector<f64>, q: usize) -> Result<AlphaMl, DimredError> {
    check_outcome(x_std, y_centered)?;
    alpha_ml_from_svd(x_std, y_centered, &ThinSvd::new(x_std), q)
}

pub(crate) fn alpha_ml_from_svd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    svd: &ThinSvd,
    q: usize,
) -> Result<AlphaMl, DimredError> {
    let (n, p) = x.shape();
    if q == 0 {
        return Err(DimredError::InvalidComponents { requested: 0, max: svd.rank });
    }
    if q > svd.rank {
        return Err(DimredError::RankDeficient { requested: q, available: svd.rank });
    }
    let x_ss = x.norm_squared();
    let y_ss = y.norm_squared();
    let kept: f64 = svd.singular_values.rows(0, q).iter().map(|s| s * s).sum();
    let x_error_variance = if q >= svd.rank { 0.0 } else { ((x_ss - kept) / (n * p) as f64).max(0.0) };
    let ur = svd.u.columns(0, svd.rank);
    let explained = (ur.transpose() * y).norm_squared();
    let raw_ey = ((y_ss - explained) / n as f64).max(0.0);
    let floored = raw_ey < SIGMA_EY_FLOOR;
    let y_error_variance = raw_ey.max(SIGMA_EY_FLOOR);
    let alpha = if x_error_variance == 0.0 {
        1.0
    } else {
        x_ss / (x_ss + y_ss * x_error_variance / y_error_variance)
    };
    Ok(AlphaMl { alpha, x_error_variance, y_error_variance, floored })
}

/// Fit PCovR with weight `alpha` in `(0, 1]` and `q` components.
/// `σ² = RSS / (N − Q)` with `RSS = ‖y − X W P_y'‖²`.
pub fn fit_pcovr(
    x_std: &DMatrix<f64>,
    y_centered: &DVector<f64>,
    q: usize,
    alpha: f64,
) -> Result<ComponentModel, DimredError> {
    check_outcome(x_std, y_centered)?;
    fit_pcovr_from_svd(x_std, y_centered, &ThinSvd::new(x_std), q, alpha)
}

pub(crate) fn fit_pcovr_from_svd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    svd: &ThinSvd,
    q: usize,
    alpha: f64,
) -> Result<ComponentModel, DimredError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DimredError::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    let (n, p) = x.shape();
    if q == 0 {
        return Err(DimredError::InvalidComponents { requested: 0, max: svd.rank });
    }
    if q > svd.rank {
        return Err(DimredError::RankDeficient { requested: q, available: svd.rank });
    }
    if n <= q {
        return Err(DimredError::DegenerateDof { rows: n, df: q });
    }
    let r = svd.rank;
    let x_ss = x.norm_squared();
    let y_ss = y.norm_squared();
    let s = svd.singular_values.rows(0, r);
    let ur = svd.u.columns(0, r);
    let uy = ur.transpose() * y;

    let mut inner = DMatrix::from_diagonal(&s.map(|v| alpha * v * v / x_ss));
    if y_ss > 0.0 && alpha < 1.0 {
        inner += (&uy * uy.transpose()) * ((1.0 - alpha) / y_ss);
    }
    let (_, vecs) = sym_eigen_desc(inner);
    let vq = vecs.columns(0, q);

    // X W = U V_q  =>  W = V S⁻¹ V_q
    let s_inv = DMatrix::from_diagonal(&s.map(|v| 1.0 / v));
    let mut weights = svd.v.columns(0, r) * s_inv * vq;
    orient_columns(&mut weights);
    let t = x * &weights;
    let px = x.transpose() * &t;
    let py = t.transpose() * y;
    let rss = (y - &t * &py).norm_squared();

    Ok(ComponentModel {
        kind: ComponentKind::Pcovr,
        n_components: q,
        n_predictors: p,
        weights,
        loadings: px,
        outcome_loadings: Some(py.clone()),
        coefficients: Some(py),
        residual_variance: Some(rss / (n - q) as f64),
        eigenvalues: None,
        stats: None,
        outcome_mean: 0.0,
        active_set: (0..p).collect(),
        alpha: Some(alpha),
        selected_threshold: None,
    })
}

/// Value of the normalized PCovR criterion for scores `t` with orthonormal
/// columns, using the optimal loadings `P_X = X'T`, `P_y = T'y`.
pub fn pcovr_objective(x: &DMatrix<f64>, y: &DVector<f64>, t: &DMatrix<f64>, alpha: f64) -> f64 {
    let x_res = x - t * (t.transpose() * x);
    let y_res = y - t * (t.transpose() * y);
    alpha * x_res.norm_squared() / x.norm_squared()
        + (1.0 - alpha) * y_res.norm_squared() / y.norm_squared()
}
