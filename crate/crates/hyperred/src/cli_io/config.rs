//! Benchmark configuration schema with field-path validation.

use crate::benchfem::{FomProblem, InitialProfile, NewtonParams};
use crate::manifold::CaseKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.to_string(), message: message.into() }
}

/// Benchmark pipeline configuration. Defaults give the full desk-scale
/// benchmark: 2000 cells, dt = 0.002 up to t = 1.5, every second step
/// snapshotted, training scenarios {0, 0.5, 1}, test scenario 0.75, basis
/// size 20.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub n_cells: usize,
    pub diffusion: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub quad_order: usize,
    pub n_r: usize,
    pub training_scenarios: Vec<f64>,
    pub test_scenario: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_cells: 2000,
            diffusion: 1.0,
            dt: 0.002,
            t_end: 1.5,
            snapshot_stride: 2,
            quad_order: 2,
            n_r: 20,
            training_scenarios: vec![0.0, 0.5, 1.0],
            test_scenario: 0.75,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_cells < 2 {
            return Err(invalid("n_cells", "need at least 2 cells"));
        }
        if !(self.diffusion > 0.0) {
            return Err(invalid("diffusion", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end > self.dt) {
            return Err(invalid("t_end", "must exceed dt"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be at least 1"));
        }
        if !(1..=3).contains(&self.quad_order) {
            return Err(invalid("quad_order", "supported orders are 1, 2, 3"));
        }
        if self.n_r == 0 {
            return Err(invalid("n_r", "must be at least 1"));
        }
        if self.training_scenarios.is_empty() {
            return Err(invalid("training_scenarios", "need at least one scenario"));
        }
        for (i, c) in self.training_scenarios.iter().enumerate() {
            if !(0.0..=1.0).contains(c) {
                return Err(invalid(
                    &format!("training_scenarios[{i}]"),
                    format!("scenario {c} outside [0, 1]"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.test_scenario) {
            return Err(invalid("test_scenario", "outside [0, 1]"));
        }
        let steps = (self.t_end / self.dt).round() as usize;
        if steps / self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "no snapshots would be taken"));
        }
        Ok(())
    }

    pub fn problem(&self, scenario: f64) -> FomProblem {
        FomProblem {
            n_cells: self.n_cells,
            diffusion: self.diffusion,
            dt: self.dt,
            t_end: self.t_end,
            scenario,
            quad_order: self.quad_order,
            newton: NewtonParams::default(),
            initial: InitialProfile::TwoGaussian,
            with_reaction: true,
            with_flux: true,
        }
    }

    /// Snapshots per scenario.
    pub fn snapshots_per_scenario(&self) -> usize {
        let steps = (self.t_end / self.dt).round() as usize;
        steps / self.snapshot_stride
    }

    /// Total snapshot count over all training scenarios.
    pub fn total_snapshots(&self) -> usize {
        self.snapshots_per_scenario() * self.training_scenarios.len()
    }
}

/// Training mode selector shared by the CLI and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Standard,
    Compressed,
}

impl TrainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainMode::Standard => "standard",
            TrainMode::Compressed => "compressed",
        }
    }
}

/// Case-kind selector with the CLI spelling.
pub fn case_kind_from_str(s: &str) -> Result<CaseKind, ConfigError> {
    match s {
        "quadrature" => Ok(CaseKind::Quadrature),
        "cell-general" => Ok(CaseKind::CellGeneral),
        "cell-simplified" => Ok(CaseKind::CellSimplified),
        other => Err(invalid("case", format!("unknown case kind `{other}`"))),
    }
}
