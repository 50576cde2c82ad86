//! Correlation screening and cross-validated threshold selection.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::pca::pca_from_gram;
use super::{check_outcome, is_constant, DimredError};
use crate::linalg::{column_means_sds, correlation};

pub const DEFAULT_CV_FOLDS: usize = 5;

/// Columns whose absolute correlation with `y` is strictly above `threshold`,
/// in original order.
pub fn screen_predictors(x: &DMatrix<f64>, y: &DVector<f64>, threshold: f64) -> Vec<usize> {
    let corrs = abs_correlations(x, y);
    active_for(&corrs, threshold)
}

fn abs_correlations(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    x.column_iter()
        .map(|c| correlation(c.as_slice(), y.as_slice()).abs())
        .collect()
}

fn active_for(corrs: &[f64], threshold: f64) -> Vec<usize> {
    (0..corrs.len()).filter(|&j| corrs[j] > threshold).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub threshold: f64,
    pub n_active: usize,
    /// Mean squared CV prediction error; `None` when infeasible or not
    /// evaluated (a single feasible active set needs no comparison).
    pub cv_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub active_set: Vec<usize>,
    pub cv_error: Option<f64>,
    pub candidates: Vec<CandidateScore>,
}

struct Fold {
    x_test: DMatrix<f64>,
    y_test: DVector<f64>,
    y_train_mean: f64,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    n_train: usize,
}

impl Fold {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, train: &[usize], test: &[usize]) -> Result<Self, DimredError> {
        let x_train = x.select_rows(train.iter());
        let (means, sds) = column_means_sds(&x_train);
        if let Some(j) = (0..sds.len()).find(|&j| is_constant(means[j], sds[j])) {
            return Err(DimredError::ConstantColumn(j));
        }
        let scale = |m: &mut DMatrix<f64>| {
            for (j, mut col) in m.column_iter_mut().enumerate() {
                let (mu, sd) = (means[j], sds[j]);
                col.apply(|v| *v = (*v - mu) / sd);
            }
        };
        let mut x_train = x_train;
        scale(&mut x_train);
        let mut x_test = x.select_rows(test.iter());
        scale(&mut x_test);
        let y_train = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let y_train_mean = y_train.mean();
        let y_train_c = y_train.add_scalar(-y_train_mean);
        Ok(Fold {
            gram: x_train.transpose() * &x_train,
            xty: x_train.transpose() * y_train_c,
            x_test,
            y_test: DVector::from_iterator(test.len(), test.iter().map(|&i| y[i])),
            y_train_mean,
            n_train: train.len(),
        })
    }

    /// Test-fold SSE of a `q`-component PCR on `active`, refitted on the
    /// training fold; `None` when the fold cannot support `q` components.
    fn sse(&self, active: &[usize], q: usize) -> Option<f64> {
        if q + 1 > self.n_train {
            return None;
        }
        let gram = self.gram.select_rows(active.iter()).select_columns(active.iter());
        let (w, lambda) = pca_from_gram(gram, q).ok()?;
        let xty = DVector::from_iterator(active.len(), active.iter().map(|&j| self.xty[j]));
        let gamma = (w.transpose() * xty).component_div(&lambda);
        let coef = w * gamma;
        let pred = self.x_test.select_columns(active.iter()) * coef;
        Some(
            self.y_test
                .iter()
                .zip(pred.iter())
                .map(|(yt, p)| (yt - self.y_train_mean - p).powi(2))
                .sum(),
        )
    }
}

/// Pick the screening threshold whose active set gives the smallest K-fold
/// cross-validated squared prediction error for a `q`-component PCR.
///
/// Only thresholds retaining at least `q` predictors are considered. Folds are
/// a single random partition shared by all candidates; each training fold is
/// standardized with its own statistics. Ties go to the larger threshold.
/// When every feasible threshold yields the same active set no folds are
/// drawn and `rng` is left untouched.
pub fn cv_select_threshold<R: Rng + ?Sized>(
    x_std: &DMatrix<f64>,
    y_centered: &DVector<f64>,
    q: usize,
    grid: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<ThresholdSelection, DimredError> {
    check_outcome(x_std, y_centered)?;
    if grid.is_empty() {
        return Err(DimredError::InvalidArgument("empty threshold grid".into()));
    }
    if let Some(bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(DimredError::InvalidArgument(format!("threshold {bad} outside [0, 1]")));
    }
    let n = x_std.nrows();
    if k < 2 || k > n {
        return Err(DimredError::InvalidArgument(format!("{k} folds for {n} rows")));
    }
    if q == 0 {
        return Err(DimredError::InvalidComponents { requested: 0, max: x_std.ncols() });
    }

    let corrs = abs_correlations(x_std, y_centered);
    let actives: Vec<Vec<usize>> = grid.iter().map(|&r| active_for(&corrs, r)).collect();
    let mut distinct: Vec<&Vec<usize>> = actives.iter().filter(|a| a.len() >= q).collect();
    distinct.sort();
    distinct.dedup();

    let mut scores: HashMap<&[usize], Option<f64>> = HashMap::new();
    match distinct.len() {
        0 => return Err(DimredError::NoFeasibleThreshold { needed: q }),
        1 => {}
        _ => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut fold_of = vec![0usize; n];
            for (pos, &i) in order.iter().enumerate() {
                fold_of[i] = pos % k;
            }
            let folds = (0..k)
                .map(|f| {
                    let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
                    let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
                    Fold::new(x_std, y_centered, &train, &test)
                })
                .collect::<Result<Vec<_>, _>>()?;
            for active in &distinct {
                let total: Option<f64> = folds.iter().map(|f| f.sse(active, q)).sum();
                scores.insert(active.as_slice(), total.map(|s| s / n as f64));
            }
        }
    }

    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, (&threshold, active)) in grid.iter().zip(&actives).enumerate() {
        let feasible = active.len() >= q;
        let cv_error = if feasible { scores.get(active.as_slice()).copied().flatten() } else { None };
        candidates.push(CandidateScore { threshold, n_active: active.len(), cv_error });
        if !feasible || (distinct.len() > 1 && cv_error.is_none()) {
            continue;
        }
        let err = cv_error.unwrap_or(0.0);
        let better = match best {
            None => true,
            Some((b, best_err)) => err < best_err || (err == best_err && threshold > grid[b]),
        };
        if better {
            best = Some((idx, err));
        }
    }
    let (idx, _) = best.ok_or(DimredError::NoFeasibleThreshold { needed: q })?;
    Ok(ThresholdSelection {
        threshold: grid[idx],
        active_set: actives[idx].clone(),
        cv_error: candidates[idx].cv_error,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> crate::SimRng {
        crate::SimRng::seed_from_u64(11)
    }

    #[test]
    fn threshold_arithmetic() {
        // columns built to have correlations of 0.9, 0.3 and 0.05 with y
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let e = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let mk = |r: f64| &y * r + &e * (1.0 - r * r).sqrt();
        let x = DMatrix::from_columns(&[mk(0.9), mk(0.3), mk(0.05)]);
        assert_eq!(screen_predictors(&x, &y, 0.1), vec![0, 1]);
        assert_eq!(screen_predictors(&x, &y, 0.0), vec![0, 1, 2]);
    }

    #[test]
    fn zero_grid_keeps_everything_without_touching_rng() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let (xs, _) = crate::dimred::standardize(&x).unwrap();
        let y = DVector::from_fn(20, |i, _| (i as f64 * 0.37).sin());
        let y = y.add_scalar(-y.mean());
        let mut r = rng();
        let before = r.clone();
        let sel = cv_select_threshold(&xs, &y, 1, &[0.0], 5, &mut r).unwrap();
        assert_eq!(sel.threshold, 0.0);
        assert_eq!(sel.active_set, vec![0, 1, 2]);
        assert_eq!(r, before);
    }

    #[test]
    fn infeasible_grid_errors() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i * 5 + j * 7) % 13) as f64);
        let y = DVector::from_fn(20, |i, _| i as f64);
        let err = cv_select_threshold(&x, &y, 3, &[0.1, 0.2], 5, &mut rng()).unwrap_err();
        assert_eq!(err, DimredError::NoFeasibleThreshold { needed: 3 });
    }

    #[test]
    fn bad_arguments() {
        let x = DMatrix::from_fn(10, 2, |i, j| (i + j) as f64);
        let y = DVector::from_fn(10, |i, _| i as f64);
        assert!(cv_select_threshold(&x, &y, 1, &[], 5, &mut rng()).is_err());
        assert!(cv_select_threshold(&x, &y, 1, &[1.5], 5, &mut rng()).is_err());
        assert!(cv_select_threshold(&x, &y, 1, &[0.1], 1, &mut rng()).is_err());
    }
}
