use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use drawdown::free_boundary::ShootConfig;
use drawdown::monte_carlo::SimConfig;
use drawdown::MarketParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Tolerances of the free-boundary shooting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Terminal offsets, decreasing.
    pub eps_list: Vec<f64>,
    /// Agreement required between the last two offsets, relative to `c/r`.
    pub sweep_tol: f64,
    pub crossing_tol: f64,
    /// Relative tolerance of the adaptive integrator.
    pub rtol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = ShootConfig::default();
        Self {
            eps_list: s.eps_list,
            sweep_tol: s.sweep_tol,
            crossing_tol: s.crossing_tol,
            rtol: s.step.rtol,
        }
    }
}

impl SolverConfig {
    pub fn shoot_config(&self) -> ShootConfig {
        let mut s = ShootConfig::default();
        s.eps_list.clone_from(&self.eps_list);
        s.sweep_tol = self.sweep_tol;
        s.crossing_tol = self.crossing_tol;
        s.step.rtol = self.rtol;
        s
    }
}

/// Grid sizes and tolerances of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub n_w: usize,
    pub n_m: usize,
    pub hjb_tol: f64,
    pub diagonal_tol: f64,
    /// Marks below `m*` at which the finite-difference oracle runs.
    pub oracle_marks: usize,
    /// Nodes of the finer oracle grid; the coarser one has half as many.
    pub oracle_nodes: usize,
    pub oracle_tol: f64,
    pub oracle_min_order: f64,
    /// Points per slice and per sweep of the monotonicity checks.
    pub proposition_points: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_w: 200,
            n_m: 200,
            hjb_tol: 1e-5,
            diagonal_tol: 1e-4,
            oracle_marks: 5,
            oracle_nodes: 2000,
            oracle_tol: 1e-3,
            oracle_min_order: 1.5,
            proposition_points: 1000,
        }
    }
}

/// Everything a command needs besides its own arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: MarketParams,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
    pub simulation: SimConfig,
    /// Directory for data files.
    pub output: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: MarketParams::SET_1,
            solver: SolverConfig::default(),
            verify: VerifyConfig::default(),
            simulation: SimConfig::default(),
            output: PathBuf::from("."),
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        let s = &self.solver;
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if s.eps_list.is_empty() || !s.eps_list.iter().all(|&e| positive(e) && e < 1.0) {
            return Err(CliError::Usage("solver.eps_list must hold values in (0, 1)".into()));
        }
        if !(positive(s.sweep_tol) && positive(s.crossing_tol) && positive(s.rtol)) {
            return Err(CliError::Usage("solver tolerances must be positive".into()));
        }
        let v = &self.verify;
        if !(positive(v.hjb_tol) && positive(v.diagonal_tol) && positive(v.oracle_tol)) {
            return Err(CliError::Usage("verify tolerances must be positive".into()));
        }
        if v.n_w < 3 || v.n_m < 1 || v.oracle_nodes < 8 || v.proposition_points < 3 {
            return Err(CliError::Usage("verify grids are too small".into()));
        }
        self.simulation.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_the_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"paramz": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"solver": {"rtoll": 1}}"#).is_err());
    }

    #[test]
    fn non_positive_tolerance_is_rejected() {
        let mut c = RunConfig::default();
        c.verify.hjb_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.solver.eps_list.clear();
        assert!(c.validate().is_err());
    }
}
