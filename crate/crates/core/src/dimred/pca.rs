use nalgebra::{DMatrix, DVector};

use super::{check_components, check_outcome, ComponentKind, ComponentModel, DimredError};
use crate::linalg::{numerical_rank, orient_columns, sym_eigen_desc, ThinSvd};

/// Leading `q` eigenvectors of a cross-product matrix `X'X`, with their
/// eigenvalues. Errors when fewer than `q` eigenvalues are positive.
pub(crate) fn pca_from_gram(
    gram: DMatrix<f64>,
    q: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), DimredError> {
    let (values, vectors) = sym_eigen_desc(gram);
    let rank = numerical_rank(&values);
    if rank < q {
        return Err(DimredError::RankDeficient { requested: q, available: rank });
    }
    let mut w = vectors.columns(0, q).into_owned();
    orient_columns(&mut w);
    Ok((w, values.rows(0, q).into_owned()))
}

/// Principal component analysis of a standardized matrix.
///
/// Uses the eigendecomposition of `X'X` when `N >= P` and a thin SVD of `X`
/// otherwise.
pub fn fit_pca(x_std: &DMatrix<f64>, q: usize) -> Result<ComponentModel, DimredError> {
    let (n, p) = x_std.shape();
    check_components(q, n, p)?;
    let (weights, eigenvalues) = if n >= p {
        pca_from_gram(x_std.transpose() * x_std, q)?
    } else {
        let svd = ThinSvd::new(x_std);
        if svd.rank < q {
            return Err(DimredError::RankDeficient { requested: q, available: svd.rank });
        }
        let mut w = svd.v.columns(0, q).into_owned();
        orient_columns(&mut w);
        let ev = svd.singular_values.rows(0, q).map(|s| s * s);
        (w, ev)
    };
    Ok(ComponentModel {
        kind: ComponentKind::Pca,
        n_components: q,
        n_predictors: p,
        loadings: weights.clone(),
        weights,
        outcome_loadings: None,
        coefficients: None,
        residual_variance: None,
        eigenvalues: Some(eigenvalues),
        stats: None,
        outcome_mean: 0.0,
        active_set: (0..p).collect(),
        alpha: None,
        selected_threshold: None,
    })
}

/// Principal component regression: regress the centred outcome on the first
/// `q` component scores. `σ² = RSS / (N - Q)`.
pub fn fit_pcr(
    x_std: &DMatrix<f64>,
    y_centered: &DVector<f64>,
    q: usize,
) -> Result<ComponentModel, DimredError> {
    check_outcome(x_std, y_centered)?;
    let mut model = fit_pca(x_std, q)?;
    let n = x_std.nrows();
    if n <= q {
        return Err(DimredError::DegenerateDof { rows: n, df: q });
    }
    let t = x_std * &model.weights;
    let tt = t.transpose() * &t;
    let ty = t.transpose() * y_centered;
    let beta = tt
        .cholesky()
        .ok_or(DimredError::RankDeficient { requested: q, available: 0 })?
        .solve(&ty);
    let rss = (y_centered - &t * &beta).norm_squared();
    model.coefficients = Some(beta);
    model.residual_variance = Some(rss / (n - q) as f64);
    Ok(model)
}
