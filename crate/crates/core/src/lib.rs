//! Multiple imputation by chained equations with principal component
//! regression and supervised dimensionality-reduction imputation models
//! (SPCR, PCovR, PLSR), plus the data generation, amputation, pooling and
//! batch machinery needed to run Monte Carlo studies of those imputers.
//!
//! Module map:
//!
//! - [`dimred`]: PCA/PCR, correlation screening with cross-validated
//!   thresholds, PCovR, and PLS on fully observed matrices.
//! - [`imputers`]: bootstrap univariate imputation methods built on `dimred`,
//!   plus normal-linear baselines.
//! - [`mice`]: the chained-equations loop.
//! - [`datagen`] and [`amputation`]: factor-model data and MCAR/MAR masks.
//! - [`analysis`]: estimators, Rubin pooling, PRB/CIW/CIC.
//! - [`harness`]: factor-grid expansion, replication runner, CSV output.

pub mod amputation;
pub mod analysis;
pub mod data;
pub mod datagen;
pub mod dimred;
pub mod harness;
pub mod imputers;
pub mod linalg;
pub mod mice;
pub mod seed;

pub use data::DataMatrix;
pub use seed::SimRng;
