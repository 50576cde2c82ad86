use std::fmt;

use crate::amputation::Mechanism;
use crate::imputers::{ImputerSpec, DEFAULT_QP_THRESHOLD};

use super::HarnessError;

/// Methods compared in the simulation: the MI variants plus complete-case
/// analysis and the fully observed reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HarnessMethod {
    Pcr,
    Spcr,
    Pcovr,
    Plsr,
    Qp,
    Am,
    All,
    Cc,
    Fo,
}

impl HarnessMethod {
    pub const ALL: [HarnessMethod; 9] = [
        HarnessMethod::Pcr,
        HarnessMethod::Spcr,
        HarnessMethod::Pcovr,
        HarnessMethod::Plsr,
        HarnessMethod::Qp,
        HarnessMethod::Am,
        HarnessMethod::All,
        HarnessMethod::Cc,
        HarnessMethod::Fo,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HarnessMethod::Pcr => "MI-PCR",
            HarnessMethod::Spcr => "MI-SPCR",
            HarnessMethod::Pcovr => "MI-PCovR",
            HarnessMethod::Plsr => "MI-PLSR",
            HarnessMethod::Qp => "MI-QP",
            HarnessMethod::Am => "MI-AM",
            HarnessMethod::All => "MI-ALL",
            HarnessMethod::Cc => "CC",
            HarnessMethod::Fo => "FO",
        }
    }

    /// Accepts the labels with or without the `MI-` prefix, case-insensitively.
    pub fn parse(s: &str) -> Option<Self> {
        let up = s.trim().to_ascii_uppercase();
        let bare = up.strip_prefix("MI-").unwrap_or(&up);
        Some(match bare {
            "PCR" => HarnessMethod::Pcr,
            "SPCR" => HarnessMethod::Spcr,
            "PCOVR" => HarnessMethod::Pcovr,
            "PLSR" | "PLS" => HarnessMethod::Plsr,
            "QP" => HarnessMethod::Qp,
            "AM" => HarnessMethod::Am,
            "ALL" => HarnessMethod::All,
            "CC" => HarnessMethod::Cc,
            "FO" => HarnessMethod::Fo,
            _ => return None,
        })
    }

    pub fn uses_components(self) -> bool {
        matches!(self, HarnessMethod::Pcr | HarnessMethod::Spcr | HarnessMethod::Pcovr | HarnessMethod::Plsr)
    }

    pub fn is_imputation(self) -> bool {
        !matches!(self, HarnessMethod::Cc | HarnessMethod::Fo)
    }

    /// Imputer for this method, or `None` for CC and FO.
    pub fn imputer_spec(self, nc: usize, settings: &MethodSettings) -> Option<ImputerSpec> {
        Some(match self {
            HarnessMethod::Pcr => ImputerSpec::Pcr { n_components: nc },
            HarnessMethod::Spcr => ImputerSpec::Spcr {
                n_components: nc,
                threshold_grid: settings.threshold_grid.clone(),
                cv_folds: settings.cv_folds,
            },
            HarnessMethod::Pcovr => ImputerSpec::Pcovr { n_components: nc },
            HarnessMethod::Plsr => ImputerSpec::Plsr { n_components: nc },
            HarnessMethod::Qp => {
                ImputerSpec::Qp { threshold: settings.qp_threshold, am_columns: settings.analysis_columns.clone() }
            }
            HarnessMethod::Am => ImputerSpec::Am { columns: settings.analysis_columns.clone() },
            HarnessMethod::All => ImputerSpec::All,
            HarnessMethod::Cc | HarnessMethod::Fo => return None,
        })
    }
}

impl fmt::Display for HarnessMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Method-specific settings shared by every condition.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSettings {
    pub threshold_grid: Vec<f64>,
    pub cv_folds: usize,
    pub qp_threshold: f64,
    /// Columns of the analysis model (0-based).
    pub analysis_columns: Vec<usize>,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            threshold_grid: crate::imputers::default_threshold_grid(),
            cv_folds: crate::dimred::DEFAULT_CV_FOLDS,
            qp_threshold: DEFAULT_QP_THRESHOLD,
            analysis_columns: vec![0, 1, 2],
        }
    }
}

/// Factor levels of the simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionGrid {
    pub l_levels: Vec<usize>,
    pub mechanisms: Vec<Mechanism>,
    pub pm_levels: Vec<f64>,
    pub methods: Vec<HarnessMethod>,
    pub nc_levels: Vec<usize>,
}

impl ConditionGrid {
    /// Component counts used in the full design.
    pub fn full_nc_levels() -> Vec<usize> {
        let mut v: Vec<usize> = (0..=12).collect();
        v.extend([20, 29, 30, 40, 48, 49, 50, 51, 52, 60, 149]);
        v
    }
}

/// One cell of the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub l: usize,
    pub mech: Mechanism,
    pub pm: f64,
    pub method: HarnessMethod,
    /// Number of components; 0 for methods without components.
    pub nc: usize,
}

impl Condition {
    pub fn n_items(&self) -> usize {
        3 * self.l
    }
}

/// Cartesian product over L, mechanism, pm, method and nc, in that nesting
/// order. Methods without components appear once with nc = 0; component
/// methods skip nc = 0 and any nc above `3L - 1`.
pub fn expand_grid(grid: &ConditionGrid) -> Result<Vec<Condition>, HarnessError> {
    let mut out = Vec::new();
    for &l in &grid.l_levels {
        let max_nc = (3 * l).saturating_sub(1);
        for &mech in &grid.mechanisms {
            for &pm in &grid.pm_levels {
                for &method in &grid.methods {
                    if method.uses_components() {
                        for &nc in grid.nc_levels.iter().filter(|&&nc| nc >= 1 && nc <= max_nc) {
                            out.push(Condition { l, mech, pm, method, nc });
                        }
                    } else {
                        out.push(Condition { l, mech, pm, method, nc: 0 });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(methods: Vec<HarnessMethod>, l: Vec<usize>, nc: Vec<usize>) -> ConditionGrid {
        ConditionGrid { l_levels: l, mechanisms: vec![Mechanism::Mar], pm_levels: vec![0.5], methods, nc_levels: nc }
    }

    #[test]
    fn nc_above_predictor_count_skipped() {
        let c = expand_grid(&grid(vec![HarnessMethod::Pcr], vec![2], vec![1, 2, 5, 6])).unwrap();
        assert_eq!(c.iter().map(|c| c.nc).collect::<Vec<_>>(), vec![1, 2, 5]);
    }

    #[test]
    fn non_component_methods_once() {
        let c = expand_grid(&grid(vec![HarnessMethod::Cc], vec![2], vec![1, 2, 3])).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].nc, 0);
    }

    #[test]
    fn l10_full_levels() {
        let c = expand_grid(&grid(vec![HarnessMethod::Spcr], vec![10], ConditionGrid::full_nc_levels())).unwrap();
        let ncs: Vec<usize> = c.iter().map(|c| c.nc).collect();
        assert_eq!(ncs, vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 20, 29]);
    }

    #[test]
    fn empty_grid() {
        assert!(matches!(
            expand_grid(&grid(vec![HarnessMethod::Pcr], vec![2], vec![6, 7])),
            Err(HarnessError::EmptyGrid)
        ));
    }

    #[test]
    fn method_labels_roundtrip() {
        for m in HarnessMethod::ALL {
            assert_eq!(HarnessMethod::parse(m.label()), Some(m));
        }
        assert_eq!(HarnessMethod::parse("MI-PLS"), Some(HarnessMethod::Plsr));
        assert_eq!(HarnessMethod::parse("ridge"), None);
    }
}
