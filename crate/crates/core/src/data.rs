//! Column-labelled numeric matrix with a missingness mask.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

/// A numeric `N x P` matrix with column labels and a parallel mask.
///
/// Masked cells keep their underlying value (amputation never alters values);
/// consumers that must not see them go through [`DataMatrix::observed_rows`]
/// or [`DataMatrix::with_missing_as_nan`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    /// `missing[j][i]` is true when cell `(i, j)` is missing.
    missing: Vec<Vec<bool>>,
    labels: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("mask shape does not match the {rows}x{cols} data")]
    MaskShape { rows: usize, cols: usize },
}

impl DataMatrix {
    /// Fully observed matrix labelled `z1..zP`.
    pub fn new(values: DMatrix<f64>) -> Self {
        let labels = (1..=values.ncols()).map(|j| format!("z{j}")).collect();
        let missing = vec![vec![false; values.nrows()]; values.ncols()];
        DataMatrix { values, missing, labels }
    }

    pub fn with_labels(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self, DataError> {
        if labels.len() != values.ncols() {
            return Err(DataError::LabelCount { expected: values.ncols(), got: labels.len() });
        }
        let missing = vec![vec![false; values.nrows()]; values.ncols()];
        Ok(DataMatrix { values, missing, labels })
    }

    /// Build from values and a column-major mask (`mask[j][i]` = cell missing).
    pub fn with_mask(values: DMatrix<f64>, mask: Vec<Vec<bool>>) -> Result<Self, DataError> {
        let mut dm = DataMatrix::new(values);
        dm.set_mask(mask)?;
        Ok(dm)
    }

    pub fn set_mask(&mut self, mask: Vec<Vec<bool>>) -> Result<(), DataError> {
        let (rows, cols) = self.values.shape();
        if mask.len() != cols || mask.iter().any(|c| c.len() != rows) {
            return Err(DataError::MaskShape { rows, cols });
        }
        self.missing = mask;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Underlying values, including those of masked cells.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.missing
    }

    pub fn column_mask(&self, j: usize) -> &[bool] {
        &self.missing[j]
    }

    pub fn set_missing(&mut self, i: usize, j: usize, missing: bool) {
        self.missing[j][i] = missing;
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[j][i]
    }

    pub fn missing_count(&self, j: usize) -> usize {
        self.missing[j].iter().filter(|&&m| m).count()
    }

    pub fn total_missing(&self) -> usize {
        (0..self.n_cols()).map(|j| self.missing_count(j)).sum()
    }

    pub fn observed_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| !self.missing[j][i]).collect()
    }

    pub fn missing_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.missing[j][i]).collect()
    }

    /// Columns that contain at least one missing cell, ascending.
    pub fn incomplete_columns(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.missing_count(j) > 0).collect()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    pub fn observed_values(&self, j: usize) -> Vec<f64> {
        self.observed_rows(j).into_iter().map(|i| self.values[(i, j)]).collect()
    }

    /// Copy with masked cells replaced by NaN.
    pub fn with_missing_as_nan(&self) -> DMatrix<f64> {
        let mut out = self.values.clone();
        for (j, col) in self.missing.iter().enumerate() {
            for (i, &m) in col.iter().enumerate() {
                if m {
                    out[(i, j)] = f64::NAN;
                }
            }
        }
        out
    }

    /// Rows observed on every column in `columns` (listwise deletion),
    /// returned as a matrix over all columns.
    pub fn complete_cases(&self, columns: &[usize]) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&i| columns.iter().all(|&j| !self.missing[j][i]))
            .collect();
        self.values.select_rows(rows.iter())
    }

    /// Write as delimited text with a header of column labels. Missing cells
    /// are written as `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.labels)?;
        for i in 0..self.n_rows() {
            let row: Vec<String> = (0..self.n_cols())
                .map(|j| {
                    if self.missing[j][i] {
                        "NA".to_string()
                    } else {
                        format!("{:.16e}", self.values[(i, j)])
                    }
                })
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
