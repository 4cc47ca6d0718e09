//! Run reports: training summaries and their aggregation into CSV/JSON
//! tables. Timing columns are reported but excluded from reproducibility;
//! every other column is deterministic for fixed inputs.

use super::config::TrainMode;
use super::store::{self, StoreError, Timings};
use crate::bounds::BoundReport;
use crate::manifold::CaseKind;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Summary of one training run, standard or compressed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub schema_version: u32,
    pub case: CaseKind,
    pub mode: TrainMode,
    pub num_summands: usize,
    pub nodal_dim: usize,
    pub num_snapshots: usize,
    pub num_test_functions: usize,
    /// Retained compression rank; absent for standard training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_thin: Option<usize>,
    pub cardinality: usize,
    /// Rows of the training operator, excluding the regularization row.
    pub equations: usize,
    /// Effective compression error; absent for standard training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression_error: Option<f64>,
    /// Achieved sqrt(F) of the trained rule on its own operator.
    pub training_residual: f64,
    /// Full-data residual, when the dense oracle fit in the memory budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
    /// Bytes of the dense manifold matrix this run would need (standard) or
    /// avoided (compressed).
    pub dense_bytes: u64,
    /// Bytes of the thin manifold matrix; equals `dense_bytes` for standard.
    pub operator_bytes: u64,
    /// Retained fraction of the snapshot dimension (k_thin / K; 1 standard).
    pub compression_ratio: f64,
    pub timings: Timings,
    pub rule_file: String,
}

impl TrainingReport {
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        store::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let report: TrainingReport = store::read_json(path)?;
        if report.schema_version != store::SCHEMA_VERSION {
            return Err(StoreError::SchemaMismatch {
                path: path.display().to_string(),
                found: report.schema_version,
                expected: store::SCHEMA_VERSION,
            });
        }
        Ok(report)
    }
}

fn fmt_opt<T: std::fmt::Display>(value: &Option<T>) -> String {
    value.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Aggregated report columns, one row per training run. Deterministic order:
/// case, mode, cardinality.
pub const REPORT_COLUMNS: &[&str] = &[
    "case",
    "mode",
    "summands",
    "nodal_dim",
    "snapshots",
    "test_functions",
    "k_thin",
    "cardinality",
    "equations",
    "compression_ratio",
    "compression_error",
    "training_residual",
    "full_residual",
    "a_posteriori",
    "a_priori",
    "dense_bytes",
    "operator_bytes",
    "rule_file",
    "t_assembly_ms",
    "t_compression_ms",
    "t_training_ms",
];

pub fn report_row(r: &TrainingReport) -> Vec<String> {
    vec![
        r.case.as_str().to_string(),
        r.mode.as_str().to_string(),
        r.num_summands.to_string(),
        r.nodal_dim.to_string(),
        r.num_snapshots.to_string(),
        r.num_test_functions.to_string(),
        fmt_opt(&r.k_thin),
        r.cardinality.to_string(),
        r.equations.to_string(),
        r.compression_ratio.to_string(),
        fmt_opt(&r.compression_error),
        r.training_residual.to_string(),
        fmt_opt(&r.full_residual),
        fmt_opt(&r.bounds.as_ref().map(|b| b.a_posteriori)),
        fmt_opt(&r.bounds.as_ref().map(|b| b.a_priori)),
        r.dense_bytes.to_string(),
        r.operator_bytes.to_string(),
        r.rule_file.clone(),
        fmt_opt(&r.timings.assembly_ms),
        fmt_opt(&r.timings.compression_ms),
        fmt_opt(&r.timings.training_ms),
    ]
}

/// Writes the aggregated table as CSV. Appends (without a header) when the
/// file already has content, so reports can accumulate across runs.
pub fn write_report_csv(path: &Path, reports: &[TrainingReport]) -> Result<(), StoreError> {
    let exists = path.exists() && std::fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| StoreError::Io { path: path.display().to_string(), source })?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if !exists {
        writer
            .write_record(REPORT_COLUMNS)
            .map_err(|source| csv_err(path, source))?;
    }
    let mut sorted: Vec<&TrainingReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        (a.case.as_str(), a.mode.as_str(), a.cardinality)
            .cmp(&(b.case.as_str(), b.mode.as_str(), b.cardinality))
    });
    for r in sorted {
        writer.write_record(report_row(r)).map_err(|source| csv_err(path, source))?;
    }
    writer.flush().map_err(|source| StoreError::Io { path: path.display().to_string(), source })?;
    Ok(())
}

fn csv_err(path: &Path, source: csv::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(source),
    }
}

/// One row of a complexity-reduced evaluation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CromEvalRow {
    pub case: CaseKind,
    pub mode: TrainMode,
    pub cardinality: usize,
    pub scenario: f64,
    pub relative_error: f64,
    pub runtime_ms: f64,
    pub rule_file: String,
}

pub fn write_crom_eval_csv(path: &Path, rows: &[CromEvalRow]) -> Result<(), StoreError> {
    let mut out = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut out);
        writer
            .write_record([
                "case",
                "mode",
                "cardinality",
                "scenario",
                "relative_error",
                "runtime_ms",
                "rule_file",
            ])
            .map_err(|source| csv_err(path, source))?;
        for r in rows {
            writer
                .write_record([
                    r.case.as_str().to_string(),
                    r.mode.as_str().to_string(),
                    r.cardinality.to_string(),
                    r.scenario.to_string(),
                    r.relative_error.to_string(),
                    r.runtime_ms.to_string(),
                    r.rule_file.clone(),
                ])
                .map_err(|source| csv_err(path, source))?;
        }
        writer.flush().map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    super::hrmx::write_atomic(path, &out)?;
    Ok(())
}

/// Writes stdout-style JSON to a writer (used by the CLI for summaries).
pub fn print_json<T: Serialize>(value: &T, mut out: impl Write) {
    if let Ok(text) = serde_json::to_string_pretty(value) {
        let _ = writeln!(out, "{text}");
    }
}
