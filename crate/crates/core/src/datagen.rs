//! Confirmatory-factor data: `L` correlated latent variables, each measured by
//! a block of items with a common loading and unique normal noise.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::data::DataMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("latent correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid factor specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub n_rows: usize,
    pub n_latent: usize,
    pub items_per_latent: usize,
    pub loading: f64,
    /// Correlation between the first two latent variables.
    pub corr_12: f64,
    /// Correlation of every other pair of latent variables.
    pub corr_other: f64,
    pub target_mean: f64,
    pub target_var: f64,
}

impl FactorSpec {
    pub fn new(n_latent: usize) -> Self {
        FactorSpec {
            n_rows: 1000,
            n_latent,
            items_per_latent: 3,
            loading: 0.85,
            corr_12: 0.8,
            corr_other: 0.1,
            target_mean: 5.0,
            target_var: 6.5,
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_latent * self.items_per_latent
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::InvalidSpec(m.to_string()));
        if self.n_latent < 2 {
            return bad("at least two latent variables are required");
        }
        if self.items_per_latent == 0 {
            return bad("items_per_latent must be positive");
        }
        if self.n_rows < 2 {
            return bad("at least two rows are required");
        }
        if !(self.loading > 0.0 && self.loading < 1.0) {
            return bad("loading must lie in (0, 1)");
        }
        if !(self.target_var > 0.0) || !self.target_mean.is_finite() {
            return bad("target variance must be positive and the mean finite");
        }
        Ok(())
    }
}

/// Latent correlation matrix.
pub fn build_psi(spec: &FactorSpec) -> Result<DMatrix<f64>, DatagenError> {
    spec.validate()?;
    let l = spec.n_latent;
    let psi = DMatrix::from_fn(l, l, |a, b| match (a, b) {
        _ if a == b => 1.0,
        (0, 1) | (1, 0) => spec.corr_12,
        _ => spec.corr_other,
    });
    if Cholesky::new(psi.clone()).is_none() {
        return Err(DatagenError::NotPositiveDefinite);
    }
    Ok(psi)
}

/// Item loading matrix (items × latents) with simple structure.
pub fn loading_matrix(spec: &FactorSpec) -> DMatrix<f64> {
    let k = spec.items_per_latent;
    DMatrix::from_fn(spec.n_items(), spec.n_latent, |i, l| if i / k == l { spec.loading } else { 0.0 })
}

/// Model-implied item correlation matrix `ΛΨΛ' + Θ`.
pub fn implied_correlation(spec: &FactorSpec) -> Result<DMatrix<f64>, DatagenError> {
    let psi = build_psi(spec)?;
    let lambda = loading_matrix(spec);
    let mut sigma = &lambda * psi * lambda.transpose();
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += 1.0 - spec.loading * spec.loading;
    }
    Ok(sigma)
}

/// Draw a fully observed `n_rows × 3L` data set whose columns are rescaled to
/// exactly the target mean and variance.
pub fn generate<R: Rng + ?Sized>(spec: &FactorSpec, rng: &mut R) -> Result<DataMatrix, DatagenError> {
    let psi = build_psi(spec)?;
    let chol = Cholesky::new(psi).ok_or(DatagenError::NotPositiveDefinite)?;
    let n = spec.n_rows;
    let l = spec.n_latent;
    let p = spec.n_items();
    let lower = chol.l();
    let unique_sd = (1.0 - spec.loading * spec.loading).sqrt();

    let mut z = DMatrix::<f64>::zeros(n, p);
    let mut raw = vec![0.0; l];
    let mut factors = vec![0.0; l];
    for i in 0..n {
        for r in raw.iter_mut() {
            *r = rng.sample(StandardNormal);
        }
        for a in 0..l {
            factors[a] = (0..=a).map(|b| lower[(a, b)] * raw[b]).sum();
        }
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            z[(i, j)] = spec.loading * factors[j / spec.items_per_latent] + unique_sd * e;
        }
    }

    let target_sd = spec.target_var.sqrt();
    for j in 0..p {
        let mut col = z.column_mut(j);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        for v in col.iter_mut() {
            *v = spec.target_mean + target_sd * (*v - mean) / sd;
        }
    }
    Ok(DataMatrix::new(z))
}
