#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sdrmice_core::seed::rng_from_seed;

/// Column-standardized predictors (sd with n - 1) and a centred outcome,
/// drawn from a three-factor model so that the spectrum is uneven.
pub fn instance(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = rng_from_seed(seed);
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    let f = DMatrix::from_fn(n, 3, |_, _| g());
    let a = DMatrix::from_fn(3, p, |_, _| g());
    let noise = DMatrix::from_fn(n, p, |_, _| 0.5 * g());
    let x = f * a + noise;
    let b = DVector::from_fn(p, |_, _| g());
    let e = DVector::from_fn(n, |_, _| g());
    let y = &x * b + e;
    (standardize(&x), center(&y))
}

pub fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let m = col.sum() / n;
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
        col.apply(|v| *v = (*v - m) / sd);
    }
    out
}

pub fn center(y: &DVector<f64>) -> DVector<f64> {
    let m = y.sum() / y.len() as f64;
    y.map(|v| v - m)
}

/// Least-squares fitted values through the normal equations.
pub fn ols_fitted(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let beta = (x.transpose() * x).lu().solve(&(x.transpose() * y)).expect("full rank");
    x * beta
}

/// Orthonormal basis of the column space of `m`.
pub fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Sine of the largest principal angle between two column spaces.
pub fn max_angle_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orth(a);
    let qb = orth(b);
    let resid = &qa - &qb * (qb.transpose() * &qa);
    resid.singular_values().max()
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
