use serde::Deserialize;

use crate::amputation::Mechanism;

use super::grid::{ConditionGrid, HarnessMethod};
use super::run::{BatchSpec, RunSettings};
use super::HarnessError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Fifty replications at L = 2 and 10.
    Desk,
    /// The full design: 240 replications at L = 2, 10 and 50.
    Paper,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(HarnessError::InvalidConfig(format!("unknown profile '{other}'"))),
        }
    }

    pub fn defaults(self) -> BatchSpec {
        let (reps, l_levels) = match self {
            Profile::Desk => (50, vec![2, 10]),
            Profile::Paper => (240, vec![2, 10, 50]),
        };
        BatchSpec {
            grid: ConditionGrid {
                l_levels,
                mechanisms: vec![Mechanism::Mcar, Mechanism::Mar],
                pm_levels: vec![0.1, 0.25, 0.5],
                methods: HarnessMethod::ALL.to_vec(),
                nc_levels: ConditionGrid::full_nc_levels(),
            },
            reps,
            seed: DEFAULT_SEED,
            workers: 1,
            trace_reps: 1,
            settings: RunSettings::default(),
        }
    }
}

/// Contents of a TOML configuration file. Every key is optional; unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub profile: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub trace_reps: Option<usize>,
    pub n_rows: Option<usize>,
    pub n_imputations: Option<usize>,
    pub n_iterations: Option<usize>,
    pub l_levels: Option<Vec<usize>>,
    pub mechanisms: Option<Vec<String>>,
    pub pm_levels: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub nc_levels: Option<Vec<usize>>,
    pub threshold_grid: Option<Vec<f64>>,
    pub cv_folds: Option<usize>,
    pub qp_threshold: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Profile defaults, then file values, then command-line overrides.
pub fn resolve(file: &FileConfig, overrides: &Overrides) -> Result<BatchSpec, HarnessError> {
    let profile = match (overrides.profile, &file.profile) {
        (Some(p), _) => p,
        (None, Some(s)) => Profile::parse(s)?,
        (None, None) => Profile::Desk,
    };
    let mut spec = profile.defaults();
    let g = &mut spec.grid;
    let s = &mut spec.settings;
    macro_rules! take {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    take!(spec.reps, file.reps);
    take!(spec.seed, file.seed);
    take!(spec.workers, file.workers);
    take!(spec.trace_reps, file.trace_reps);
    take!(s.n_rows, file.n_rows);
    take!(s.n_imputations, file.n_imputations);
    take!(s.n_iterations, file.n_iterations);
    take!(g.l_levels, file.l_levels);
    take!(g.pm_levels, file.pm_levels);
    take!(g.nc_levels, file.nc_levels);
    take!(s.methods.threshold_grid, file.threshold_grid);
    take!(s.methods.cv_folds, file.cv_folds);
    take!(s.methods.qp_threshold, file.qp_threshold);
    if let Some(ms) = &file.mechanisms {
        g.mechanisms = ms
            .iter()
            .map(|m| Mechanism::parse(m).ok_or_else(|| HarnessError::InvalidConfig(format!("unknown mechanism '{m}'"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(ms) = &file.methods {
        g.methods = ms
            .iter()
            .map(|m| HarnessMethod::parse(m).ok_or_else(|| HarnessError::InvalidConfig(format!("unknown method '{m}'"))))
            .collect::<Result<_, _>>()?;
    }
    take!(spec.reps, overrides.reps);
    take!(spec.seed, overrides.seed);
    take!(spec.workers, overrides.workers);
    validate(&spec)?;
    Ok(spec)
}

fn validate(spec: &BatchSpec) -> Result<(), HarnessError> {
    let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
    let g = &spec.grid;
    let s = &spec.settings;
    if spec.reps == 0 {
        return bad("reps must be at least 1");
    }
    if spec.workers == 0 {
        return bad("workers must be at least 1");
    }
    if g.l_levels.iter().any(|&l| l < 2) {
        return bad("every L level must be at least 2");
    }
    if g.pm_levels.iter().any(|pm| !(0.0..1.0).contains(pm)) {
        return bad("pm levels must lie in [0, 1)");
    }
    if s.n_rows < 4 {
        return bad("n_rows must be at least 4");
    }
    if s.n_imputations == 0 || s.n_iterations == 0 {
        return bad("n_imputations and n_iterations must be at least 1");
    }
    if s.methods.cv_folds < 2 {
        return bad("cv_folds must be at least 2");
    }
    if s.methods.threshold_grid.is_empty() || s.methods.threshold_grid.iter().any(|t| !(0.0..1.0).contains(t)) {
        return bad("threshold_grid must be non-empty with values in [0, 1)");
    }
    if !(0.0..1.0).contains(&s.methods.qp_threshold) {
        return bad("qp_threshold must lie in [0, 1)");
    }
    Ok(())
}
