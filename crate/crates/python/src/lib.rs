//! Python bindings: data generation, amputation, component models, the MICE
//! engine, pooling and a single study replication.
//!
//! Matrices cross the boundary as lists of rows.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sdrmice_core::amputation::{self, Mechanism, MissingnessSpec};
use sdrmice_core::analysis::{self, Estimate, Scale};
use sdrmice_core::datagen::{generate, FactorSpec};
use sdrmice_core::dimred::{self, alpha_ml, ComponentKind};
use sdrmice_core::harness::{self, Condition, HarnessMethod, MethodSettings, RunSettings, DEFAULT_SEED};
use sdrmice_core::mice::{self, MiceConfig};
use sdrmice_core::seed::rng_from_seed;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse_mechanism(s: &str) -> PyResult<Mechanism> {
    Mechanism::parse(s).ok_or_else(|| err(format!("unknown mechanism '{s}'")))
}

fn parse_method(s: &str) -> PyResult<HarnessMethod> {
    HarnessMethod::parse(s).ok_or_else(|| err(format!("unknown method '{s}'")))
}

/// Numeric matrix with a missingness mask. Masked cells read back as NaN.
#[pyclass(name = "DataMatrix", module = "sdrmice", frozen)]
struct PyDataMatrix {
    inner: sdrmice_core::DataMatrix,
}

#[pymethods]
impl PyDataMatrix {
    /// NaN entries become missing cells.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let values = to_matrix(&rows)?;
        let mask = (0..values.ncols()).map(|j| values.column(j).iter().map(|v| v.is_nan()).collect()).collect();
        let inner = sdrmice_core::DataMatrix::with_mask(values, mask).map_err(err)?;
        Ok(PyDataMatrix { inner })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.with_missing_as_nan())
    }

    /// Values without masking, including those hidden by amputation.
    fn underlying(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.values())
    }

    fn missing_count(&self, column: usize) -> PyResult<usize> {
        if column >= self.inner.n_cols() {
            return Err(err("column out of range"));
        }
        Ok(self.inner.missing_count(column))
    }

    fn missing_fraction(&self) -> f64 {
        self.inner.total_missing() as f64 / (self.inner.n_rows() * self.inner.n_cols()).max(1) as f64
    }

    fn __repr__(&self) -> String {
        format!("DataMatrix({}x{}, {} missing)", self.inner.n_rows(), self.inner.n_cols(), self.inner.total_missing())
    }
}

/// A fitted PCA, SPCR, PCovR or PLS model on standardized predictors.
#[pyclass(name = "ComponentModel", module = "sdrmice", frozen)]
struct PyComponentModel {
    inner: dimred::ComponentModel,
}

#[pymethods]
impl PyComponentModel {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            ComponentKind::Pca => "pca",
            ComponentKind::Spcr => "spcr",
            ComponentKind::Pcovr => "pcovr",
            ComponentKind::Pls => "pls",
        }
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.weights)
    }

    #[getter]
    fn loadings(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.loadings)
    }

    #[getter]
    fn coefficients(&self) -> Option<Vec<f64>> {
        self.inner.coefficients.as_ref().map(|c| c.iter().copied().collect())
    }

    #[getter]
    fn eigenvalues(&self) -> Option<Vec<f64>> {
        self.inner.eigenvalues.as_ref().map(|c| c.iter().copied().collect())
    }

    #[getter]
    fn residual_variance(&self) -> Option<f64> {
        self.inner.residual_variance
    }

    #[getter]
    fn active_set(&self) -> Vec<usize> {
        self.inner.active_set.clone()
    }

    #[getter]
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha
    }

    /// Component scores of raw predictors, standardized with the training statistics.
    fn scores(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = self.checked(x)?;
        let stats = self.inner.stats.as_ref().ok_or_else(|| err("model has no standardization statistics"))?;
        Ok(to_rows(&self.inner.scores(&stats.apply(&x))))
    }

    /// Outcome predictions on the original scale.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = self.checked(x)?;
        let pred = self.inner.predict(&x).ok_or_else(|| err("PCA models have no outcome"))?;
        Ok(pred.iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!("ComponentModel(kind={}, n_components={})", self.kind(), self.inner.n_components)
    }
}

impl PyComponentModel {
    fn checked(&self, x: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
        let x = to_matrix(&x)?;
        if x.ncols() != self.inner.n_predictors {
            return Err(err(format!("expected {} columns, got {}", self.inner.n_predictors, x.ncols())));
        }
        Ok(x)
    }
}

fn prepare(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<(DMatrix<f64>, dimred::StandardizationStats, DVector<f64>, f64)> {
    let x = to_matrix(&x)?;
    if y.len() != x.nrows() {
        return Err(err(format!("x has {} rows but y has {}", x.nrows(), y.len())));
    }
    let (xs, stats) = dimred::standardize(&x).map_err(err)?;
    let y = DVector::from_vec(y);
    let mean = y.mean();
    Ok((xs, stats, y.add_scalar(-mean), mean))
}

fn finish(mut model: dimred::ComponentModel, stats: dimred::StandardizationStats, mean: f64) -> PyComponentModel {
    model.stats = Some(stats);
    model.outcome_mean = mean;
    PyComponentModel { inner: model }
}

/// PCA of the standardized columns of `x`.
#[pyfunction]
fn fit_pca(x: Vec<Vec<f64>>, n_components: usize) -> PyResult<PyComponentModel> {
    let x = to_matrix(&x)?;
    let (xs, stats) = dimred::standardize(&x).map_err(err)?;
    let model = dimred::fit_pca(&xs, n_components).map_err(err)?;
    Ok(finish(model, stats, 0.0))
}

#[pyfunction]
fn fit_pcr(x: Vec<Vec<f64>>, y: Vec<f64>, n_components: usize) -> PyResult<PyComponentModel> {
    let (xs, stats, yc, mean) = prepare(x, y)?;
    Ok(finish(dimred::fit_pcr(&xs, &yc, n_components).map_err(err)?, stats, mean))
}

/// PCovR; `alpha` defaults to the maximum-likelihood weight.
#[pyfunction]
#[pyo3(signature = (x, y, n_components, alpha=None))]
fn fit_pcovr(x: Vec<Vec<f64>>, y: Vec<f64>, n_components: usize, alpha: Option<f64>) -> PyResult<PyComponentModel> {
    let (xs, stats, yc, mean) = prepare(x, y)?;
    let alpha = match alpha {
        Some(a) => a,
        None => alpha_ml(&xs, &yc, n_components).map_err(err)?.alpha,
    };
    Ok(finish(dimred::fit_pcovr(&xs, &yc, n_components, alpha).map_err(err)?, stats, mean))
}

#[pyfunction]
fn fit_pls(x: Vec<Vec<f64>>, y: Vec<f64>, n_components: usize) -> PyResult<PyComponentModel> {
    let (xs, stats, yc, mean) = prepare(x, y)?;
    Ok(finish(dimred::fit_pls(&xs, &yc, n_components).map_err(err)?, stats, mean))
}

/// Items from the factor model with `n_latent` latent variables, three items each.
#[pyfunction]
#[pyo3(signature = (n_latent, n_rows=1000, seed=0))]
fn generate_data(n_latent: usize, n_rows: usize, seed: u64) -> PyResult<PyDataMatrix> {
    let mut spec = FactorSpec::new(n_latent);
    spec.n_rows = n_rows;
    let inner = generate(&spec, &mut rng_from_seed(seed)).map_err(err)?;
    Ok(PyDataMatrix { inner })
}

/// Impose MCAR or MAR missingness on the first three columns.
#[pyfunction]
#[pyo3(signature = (data, mechanism, pm, seed=0))]
fn ampute(data: &PyDataMatrix, mechanism: &str, pm: f64, seed: u64) -> PyResult<PyDataMatrix> {
    let spec = MissingnessSpec::standard(parse_mechanism(mechanism)?, pm);
    let inner = amputation::ampute(&data.inner, &spec, &mut rng_from_seed(seed)).map_err(err)?;
    Ok(PyDataMatrix { inner })
}

/// Multiply impute `data`; returns the completed datasets as lists of rows.
#[pyfunction]
#[pyo3(signature = (data, method, n_components=0, n_imputations=5, n_iterations=20, seed=0))]
fn run_mice(
    py: Python<'_>,
    data: &PyDataMatrix,
    method: &str,
    n_components: usize,
    n_imputations: usize,
    n_iterations: usize,
    seed: u64,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let method = parse_method(method)?;
    let imputer = method
        .imputer_spec(n_components, &MethodSettings::default())
        .ok_or_else(|| err(format!("{} is not an imputation method", method.label())))?;
    let config = MiceConfig { n_imputations, n_iterations, visit_order: None, imputer, seed };
    let set = py.detach(|| mice::run_mice(&data.inner, &config)).map_err(err)?;
    Ok(set.datasets.iter().map(to_rows).collect())
}

fn pooled_dict<'py>(py: Python<'py>, p: &analysis::PooledEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("estimate", p.point)?;
    d.set_item("within", p.within)?;
    d.set_item("between", p.between)?;
    d.set_item("total", p.total)?;
    d.set_item("df", p.df)?;
    d.set_item("ci_lower", p.ci_lower)?;
    d.set_item("ci_upper", p.ci_upper)?;
    Ok(d)
}

/// Rubin's rules over per-imputation estimates and standard errors. With
/// `fisher_z`, inputs are on the atanh scale and the interval is back-transformed.
#[pyfunction]
#[pyo3(signature = (points, ses, level=0.95, fisher_z=false))]
fn pool<'py>(
    py: Python<'py>,
    points: Vec<f64>,
    ses: Vec<f64>,
    level: f64,
    fisher_z: bool,
) -> PyResult<Bound<'py, PyDict>> {
    if points.len() != ses.len() {
        return Err(err("points and ses differ in length"));
    }
    let scale = if fisher_z { Scale::FisherZ } else { Scale::Identity };
    let ests: Vec<Estimate> = points.iter().zip(&ses).map(|(&point, &se)| Estimate { point, se, scale }).collect();
    let p = analysis::pool_with(&ests, level, analysis::DfMethod::Rubin).map_err(err)?;
    pooled_dict(py, &p)
}

/// Percent relative bias of the mean point estimate.
#[pyfunction]
fn prb(points: Vec<f64>, truth: f64) -> PyResult<f64> {
    analysis::prb(&points, truth).map_err(err)
}

/// Mean interval width.
#[pyfunction]
fn ciw(intervals: Vec<(f64, f64)>) -> PyResult<f64> {
    analysis::ciw(&intervals).map_err(err)
}

/// Fraction of intervals covering `truth`.
#[pyfunction]
fn cic(intervals: Vec<(f64, f64)>, truth: f64) -> PyResult<f64> {
    analysis::cic(&intervals, truth).map_err(err)
}

/// One replication of one study condition; one dict per estimand.
#[pyfunction]
#[pyo3(signature = (
    n_latent, mechanism, pm, method, nc=0, rep=0, seed=DEFAULT_SEED,
    n_rows=1000, n_imputations=5, n_iterations=20
))]
#[allow(clippy::too_many_arguments)]
fn run_replication<'py>(
    py: Python<'py>,
    n_latent: usize,
    mechanism: &str,
    pm: f64,
    method: &str,
    nc: usize,
    rep: usize,
    seed: u64,
    n_rows: usize,
    n_imputations: usize,
    n_iterations: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let method = parse_method(method)?;
    let condition = Condition {
        l: n_latent,
        mech: parse_mechanism(mechanism)?,
        pm,
        method,
        nc: if method.uses_components() { nc } else { 0 },
    };
    let settings = RunSettings { n_rows, n_imputations, n_iterations, ..RunSettings::default() };
    let out = py.detach(|| harness::run_replication(&condition, rep, seed, &settings, false)).map_err(err)?;
    out.records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("estimand", r.estimand.to_string())?;
            d.set_item("estimate", r.estimate)?;
            d.set_item("ci_lower", r.ci_lower)?;
            d.set_item("ci_upper", r.ci_upper)?;
            d.set_item("truth", r.truth)?;
            d.set_item("status", r.status.label())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn sdrmice(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataMatrix>()?;
    m.add_class::<PyComponentModel>()?;
    m.add_function(wrap_pyfunction!(generate_data, m)?)?;
    m.add_function(wrap_pyfunction!(ampute, m)?)?;
    m.add_function(wrap_pyfunction!(run_mice, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pcr, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pcovr, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pls, m)?)?;
    m.add_function(wrap_pyfunction!(pool, m)?)?;
    m.add_function(wrap_pyfunction!(prb, m)?)?;
    m.add_function(wrap_pyfunction!(ciw, m)?)?;
    m.add_function(wrap_pyfunction!(cic, m)?)?;
    m.add_function(wrap_pyfunction!(run_replication, m)?)?;
    Ok(())
}
