//! Partial least squares regression for a single outcome (NIPALS).

use nalgebra::{DMatrix, DVector};

use super::{check_components, check_outcome, ComponentKind, ComponentModel, DimredError};
use crate::linalg::sym_eigen_desc;

const COLLAPSE_TOL: f64 = 1e-10;

/// Sequential PLS. Each weight vector is proportional to `X_(q)' y`, where
/// `X_(q)` is `X` deflated against the previous scores, so the scores are
/// mutually orthogonal. Residual variance uses the naive degrees of freedom
/// `Q + 1`: `σ² = RSS / (N − Q − 1)`.
///
/// When `X_(q)' y` vanishes while `X_(q)` does not (the outcome is already
/// fully explained), the dominant direction of `X_(q)` is used instead; the
/// resulting component has a zero coefficient.
pub fn fit_pls(x_std: &DMatrix<f64>, y_centered: &DVector<f64>, q: usize) -> Result<ComponentModel, DimredError> {
    check_outcome(x_std, y_centered)?;
    let (n, p) = x_std.shape();
    check_components(q, n, p)?;
    if n <= q + 1 {
        return Err(DimredError::DegenerateDof { rows: n, df: q + 1 });
    }

    let x_norm = x_std.norm();
    let xty_norm = (x_std.transpose() * y_centered).norm();
    let mut xk = x_std.clone();
    let mut raw_w = DMatrix::zeros(p, q);
    let mut loadings = DMatrix::zeros(p, q);
    let mut coef = DVector::zeros(q);

    for a in 0..q {
        if xk.norm() <= COLLAPSE_TOL * x_norm {
            return Err(DimredError::DeflationCollapse { completed: a });
        }
        let mut w = xk.transpose() * y_centered;
        if w.norm() <= COLLAPSE_TOL * xty_norm.max(f64::MIN_POSITIVE) {
            let (_, vecs) = sym_eigen_desc(xk.transpose() * &xk);
            w = vecs.column(0).into_owned();
        }
        w.normalize_mut();
        let t = &xk * &w;
        let tt = t.norm_squared();
        if tt <= (COLLAPSE_TOL * x_norm).powi(2) {
            return Err(DimredError::DeflationCollapse { completed: a });
        }
        let pa = xk.transpose() * &t / tt;
        coef[a] = t.dot(y_centered) / tt;
        xk -= &t * pa.transpose();
        raw_w.set_column(a, &w);
        loadings.set_column(a, &pa);
    }

    // rotation R = W (P'W)^-1 gives T = X R on the undeflated matrix
    let pw = loadings.transpose() * &raw_w;
    let pw_inv = pw
        .try_inverse()
        .ok_or(DimredError::DeflationCollapse { completed: q })?;
    let weights = &raw_w * pw_inv;
    let t = x_std * &weights;
    let rss = (y_centered - &t * &coef).norm_squared();

    Ok(ComponentModel {
        kind: ComponentKind::Pls,
        n_components: q,
        n_predictors: p,
        weights,
        loadings,
        outcome_loadings: Some(coef.clone()),
        coefficients: Some(coef),
        residual_variance: Some(rss / (n - q - 1) as f64),
        eigenvalues: None,
        stats: None,
        outcome_mean: 0.0,
        active_set: (0..p).collect(),
        alpha: None,
        selected_threshold: None,
    })
}
