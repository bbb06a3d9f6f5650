//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slbvp_core::domain::{DomainShape, DomainSpec};
use slbvp_core::solver::{HomotopyMode, SolveConfig};

use crate::exit::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyConfig {
    pub mode: HomotopyMode,
    pub steps: usize,
    /// Smallest step the adaptive mode may take.
    pub min_step: f64,
}

fn default_armijo() -> f64 {
    SolveConfig::default().armijo
}

fn default_min_step_length() -> f64 {
    SolveConfig::default().min_step_length
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_armijo")]
    pub armijo: f64,
    #[serde(default = "default_min_step_length")]
    pub min_step_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_csv: bool,
    pub emit_svg: bool,
    pub emit_dual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source_domain: DomainShape,
    pub target_domain: DomainShape,
    pub grid: GridConfig,
    pub homotopy: HomotopyConfig,
    pub newton: NewtonConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    /// Only read by `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<Vec<GridConfig>>,
}

/// Domains built from a validated config.
#[derive(Debug, Clone)]
pub struct Domains {
    pub source: DomainSpec,
    pub target: DomainSpec,
}

pub fn validate_grid(grid: &GridConfig) -> Result<(), CliError> {
    if grid.n_r < 8 {
        return Err(CliError::config(format!("grid.n_r must be at least 8, got {}", grid.n_r)));
    }
    if grid.n_phi < 16 || grid.n_phi % 2 != 0 {
        return Err(CliError::config(format!(
            "grid.n_phi must be even and at least 16, got {}",
            grid.n_phi
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            newton_tol: self.newton.tol,
            max_newton_iters: self.newton.max_iter,
            armijo: self.newton.armijo,
            min_step_length: self.newton.min_step_length,
            homotopy_steps: self.homotopy.steps,
            mode: self.homotopy.mode,
            min_t_step: self.homotopy.min_step,
            ..SolveConfig::default()
        }
    }

    /// Checks everything that can be checked without solving; builds the
    /// domains on the way.
    pub fn validate(&self) -> Result<Domains, CliError> {
        validate_grid(&self.grid)?;
        if let Some(list) = &self.resolutions {
            for g in list {
                validate_grid(g)?;
            }
        }
        if !(self.homotopy.min_step > 0.0 && self.homotopy.min_step <= 1.0) {
            return Err(CliError::config(format!(
                "homotopy.min_step must lie in (0, 1], got {}",
                self.homotopy.min_step
            )));
        }
        if !(self.newton.armijo < 1.0) {
            return Err(CliError::config("newton.armijo must be below 1"));
        }
        self.solve_config().validate().map_err(CliError::from_core)?;
        if self.output.dir.as_os_str().is_empty() {
            return Err(CliError::config("output.dir must not be empty"));
        }
        let source = DomainSpec::new(self.source_domain.clone()).map_err(CliError::from_core)?;
        let target = DomainSpec::new(self.target_domain.clone()).map_err(CliError::from_core)?;
        Ok(Domains { source, target })
    }
}
