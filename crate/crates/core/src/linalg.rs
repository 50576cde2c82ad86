//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance used for rank decisions on eigenvalues / singular values.
pub const RANK_TOL: f64 = 1e-10;

/// Column means and sample standard deviations (denominator `n - 1`).
pub fn column_means_sds(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let m = col.sum() / n;
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        means.push(m);
        sds.push((ss / (n - 1.0)).sqrt());
    }
    (means, sds)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Pearson correlation. Returns 0 when either input has zero variance.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Symmetric eigendecomposition with eigenpairs sorted by descending eigenvalue.
pub fn sym_eigen_desc(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Flip each column so that its largest-magnitude entry is positive.
/// Returns the applied signs.
pub fn orient_columns(w: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(w.ncols());
    for mut col in w.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 };
        if s < 0.0 {
            col.neg_mut();
        }
        signs.push(s);
    }
    signs
}

/// Number of eigenvalues above the relative rank tolerance.
pub fn numerical_rank(values: &DVector<f64>) -> usize {
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > top * RANK_TOL).count()
}

/// Ordinary least-squares fit.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    pub rss: f64,
}

/// Least squares by Householder QR. Returns `None` when the design does not
/// have full column rank (or has more columns than rows).
pub fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<LeastSquares> {
    let (n, p) = design.shape();
    if p == 0 {
        return Some(LeastSquares {
            coefficients: DVector::zeros(0),
            fitted: DVector::zeros(n),
            rss: y.norm_squared(),
        });
    }
    if n < p {
        return None;
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    if diag_max == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= diag_max * 1e-10) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    let coefficients = r.solve_upper_triangular(&qty)?;
    let fitted = design * &coefficients;
    let rss = (y - &fitted).norm_squared();
    Some(LeastSquares { coefficients, fitted, rss })
}

/// Thin SVD with singular values sorted in descending order and the
/// numerical rank recorded.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `n x k` left singular vectors.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `p x k` right singular vectors.
    pub v: DMatrix<f64>,
    pub rank: usize,
}

impl ThinSvd {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let svd = x.clone().svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let singular_values = DVector::from_iterator(order.len(), order.iter().map(|&i| s[i]));
        let u = u.select_columns(order.iter());
        let v = v_t.transpose().select_columns(order.iter());
        let top = singular_values.iter().copied().fold(0.0_f64, f64::max);
        let rank = if top == 0.0 {
            0
        } else {
            singular_values.iter().filter(|&&v| v > top * RANK_TOL).count()
        };
        ThinSvd { u, singular_values, v, rank }
    }
}

/// Least squares via the pseudo-inverse; works for rank-deficient designs.
pub fn lstsq_fitted(svd: &ThinSvd, y: &DVector<f64>) -> DVector<f64> {
    let ur = svd.u.columns(0, svd.rank);
    ur * (ur.transpose() * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_desc(m);
        assert_eq!(vals.as_slice(), &[5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_makes_largest_entry_positive() {
        let mut w = DMatrix::from_row_slice(2, 2, &[0.1, 0.3, -0.9, -0.2]);
        let signs = orient_columns(&mut w);
        assert_eq!(signs, vec![-1.0, 1.0]);
        assert!(w[(1, 0)] > 0.0 && w[(0, 1)] > 0.0);
    }

    #[test]
    fn ols_detects_collinearity() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(ols(&x, &y).is_none());
    }

    #[test]
    fn simple_regression_matches_closed_form() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 2.0, 5.0]);
        let fit = ols(&x, &y).unwrap();
        // slope = Sxy / Sxx = 5.5 / 5 ; intercept = 2.75 - 1.1 * 1.5
        assert!((fit.coefficients[1] - 1.1).abs() < 1e-12);
        assert!((fit.coefficients[0] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn correlation_of_constant_is_zero() {
        assert_eq!(correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.997_948_715_788_673_3).abs() < 1e-12);
    }
}
