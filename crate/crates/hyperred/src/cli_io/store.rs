//! On-disk layout: run manifests, snapshot/basis/dataset/compressed-data
//! stores. Matrices live in HRMX files, metadata in JSON sidecars; manifests
//! declare dimensions and are validated against the stored headers on load.

use super::config::BenchmarkConfig;
use super::hrmx::{self, HrmxError};
use crate::benchfem::{RomBasis, SnapshotSet};
use crate::compression::CompressedDataset;
use crate::kernels::DenseMatrix;
use crate::manifold::{CaseKind, StructuredBasis, TrainingDataset};
use crate::training::{EarlyStop, SparseRule};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Hrmx(#[from] HrmxError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("json error on {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("schema mismatch in {path}: found version {found}, expected {expected}")]
    SchemaMismatch { path: String, found: u32, expected: u32 },
    #[error("manifest declares {what} = {declared}, stored file has {actual}")]
    DimensionMismatch { what: String, declared: usize, actual: usize },
    #[error("missing file referenced by manifest: {0}")]
    MissingFile(String),
    #[error(transparent)]
    Manifold(#[from] crate::manifold::ManifoldError),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.display().to_string(), source }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| StoreError::Json { path: path.display().to_string(), source })?;
    hrmx::write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text)
        .map_err(|source| StoreError::Json { path: path.display().to_string(), source })
}

/// Phase wall-clock timings in milliseconds. Excluded from reproducibility
/// comparisons; everything else in the manifest is deterministic.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Timings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fom_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pod_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembly_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_ms: Option<f64>,
}

/// One scenario's snapshot slice within the concatenated snapshot matrices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioSegment {
    pub scenario: f64,
    pub start: usize,
    pub count: usize,
}

/// Run manifest: dimensions, file registry, configuration and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub config: BenchmarkConfig,
    pub dofs: usize,
    pub quad_points: usize,
    pub snapshots: usize,
    pub n_r: usize,
    pub segments: Vec<ScenarioSegment>,
    /// Relative paths of the stored matrices, keyed by role.
    pub files: std::collections::BTreeMap<String, String>,
    #[serde(default)]
    pub timings: Timings,
}

impl RunManifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        write_json(&Self::path(dir), self)
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let path = Self::path(dir);
        let manifest: RunManifest = read_json(&path)?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(StoreError::SchemaMismatch {
                path: path.display().to_string(),
                found: manifest.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(manifest)
    }

    /// Checks that every referenced file exists and matches the declared
    /// dimensions.
    pub fn validate(&self, dir: &Path) -> Result<(), StoreError> {
        let expect = |role: &str| -> Result<PathBuf, StoreError> {
            let rel =
                self.files.get(role).ok_or_else(|| StoreError::MissingFile(role.to_string()))?;
            let path = dir.join(rel);
            if !path.exists() {
                return Err(StoreError::MissingFile(path.display().to_string()));
            }
            Ok(path)
        };
        let check = |what: &str, path: &Path, rows: usize, cols: usize| -> Result<(), StoreError> {
            let (r, c) = hrmx::read_dims(path)?;
            if r != rows {
                return Err(StoreError::DimensionMismatch {
                    what: format!("{what} rows"),
                    declared: rows,
                    actual: r,
                });
            }
            if c != cols {
                return Err(StoreError::DimensionMismatch {
                    what: format!("{what} cols"),
                    declared: cols,
                    actual: c,
                });
            }
            Ok(())
        };
        check("states", &expect("states")?, self.dofs, self.snapshots)?;
        check("nonlinearity", &expect("nonlinearity")?, self.quad_points, self.snapshots)?;
        check("basis", &expect("basis")?, self.dofs, self.n_r)?;
        Ok(())
    }
}

/// Writes concatenated snapshot data plus the POD basis for a run.
pub fn save_run(
    dir: &Path,
    seed: u64,
    config: &BenchmarkConfig,
    sets: &[SnapshotSet],
    basis: &RomBasis,
    timings: Timings,
) -> Result<RunManifest, StoreError> {
    fs::create_dir_all(dir.join("snapshots")).map_err(|e| io_err(dir, e))?;
    let dofs = basis.dofs();
    let total: usize = sets.iter().map(|s| s.len()).sum();
    let quad_points = sets.first().map(|s| s.nonlinearity.rows()).unwrap_or(0);

    let mut states = DenseMatrix::zeros(dofs, total);
    let mut nonlin = DenseMatrix::zeros(quad_points, total);
    let mut segments = Vec::new();
    let mut col = 0;
    for set in sets {
        segments.push(ScenarioSegment { scenario: set.scenario, start: col, count: set.len() });
        for k in 0..set.len() {
            for i in 0..dofs {
                states.set(i, col, set.states.get(i, k));
            }
            for q in 0..quad_points {
                nonlin.set(q, col, set.nonlinearity.get(q, k));
            }
            col += 1;
        }
    }
    hrmx::write_matrix(&dir.join("snapshots/states.hrmx"), &states)?;
    hrmx::write_matrix(&dir.join("snapshots/nonlinearity.hrmx"), &nonlin)?;
    hrmx::write_matrix(&dir.join("snapshots/basis.hrmx"), &basis.v)?;
    hrmx::write_vector(&dir.join("snapshots/spectrum.hrmx"), &basis.singular_values)?;

    let mut files = std::collections::BTreeMap::new();
    files.insert("states".into(), "snapshots/states.hrmx".into());
    files.insert("nonlinearity".into(), "snapshots/nonlinearity.hrmx".into());
    files.insert("basis".into(), "snapshots/basis.hrmx".into());
    files.insert("spectrum".into(), "snapshots/spectrum.hrmx".into());

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        seed,
        config: config.clone(),
        dofs,
        quad_points,
        snapshots: total,
        n_r: basis.n_r(),
        segments,
        files,
        timings,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

pub fn load_basis(dir: &Path, manifest: &RunManifest) -> Result<RomBasis, StoreError> {
    let v = hrmx::read_matrix(&dir.join(&manifest.files["basis"]))?;
    let singular_values = hrmx::read_vector(&dir.join(&manifest.files["spectrum"]))?;
    Ok(RomBasis { v, singular_values })
}

pub fn load_nonlinearity_snapshots(
    dir: &Path,
    manifest: &RunManifest,
) -> Result<DenseMatrix, StoreError> {
    Ok(hrmx::read_matrix(&dir.join(&manifest.files["nonlinearity"]))?)
}

pub fn load_state_snapshots(dir: &Path, manifest: &RunManifest) -> Result<DenseMatrix, StoreError> {
    Ok(hrmx::read_matrix(&dir.join(&manifest.files["states"]))?)
}

/// Dataset metadata sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub schema_version: u32,
    pub kind: CaseKind,
    pub num_summands: usize,
    pub nodal_dim: usize,
    pub num_snapshots: usize,
    pub num_test_functions: usize,
    pub group_sizes: Vec<usize>,
}

pub fn dataset_dir(dir: &Path, kind: CaseKind) -> PathBuf {
    dir.join(format!("dataset-{}", kind.as_str()))
}

pub fn save_dataset(dir: &Path, kind: CaseKind, ds: &TrainingDataset) -> Result<(), StoreError> {
    let root = dataset_dir(dir, kind);
    fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
    let basis = ds.basis();
    let n_r = basis.num_test_functions();
    let nodal = basis.nodal_dim();
    let mut test_values = DenseMatrix::zeros(n_r, nodal);
    for n in 0..n_r {
        for j in 0..nodal {
            test_values.set(n, j, basis.test_value(n, j));
        }
    }
    hrmx::write_matrix(&root.join("test_values.hrmx"), &test_values)?;
    hrmx::write_matrix(&root.join("snapshots.hrmx"), ds.snapshots())?;
    hrmx::write_vector(&root.join("truth_weights.hrmx"), ds.truth_weights())?;
    hrmx::write_vector(&root.join("regularization.hrmx"), ds.regularization())?;
    write_json(
        &root.join("info.json"),
        &DatasetInfo {
            schema_version: SCHEMA_VERSION,
            kind,
            num_summands: ds.num_summands(),
            nodal_dim: nodal,
            num_snapshots: ds.num_snapshots(),
            num_test_functions: n_r,
            group_sizes: basis.group_sizes(),
        },
    )
}

pub fn load_dataset(dir: &Path, kind: CaseKind) -> Result<TrainingDataset, StoreError> {
    let root = dataset_dir(dir, kind);
    let info: DatasetInfo = read_json(&root.join("info.json"))?;
    if info.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaMismatch {
            path: root.join("info.json").display().to_string(),
            found: info.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let test_values = hrmx::read_matrix(&root.join("test_values.hrmx"))?;
    let snapshots = hrmx::read_matrix(&root.join("snapshots.hrmx"))?;
    let truth_weights = hrmx::read_vector(&root.join("truth_weights.hrmx"))?;
    let regularization = hrmx::read_vector(&root.join("regularization.hrmx"))?;
    let rows: Vec<Vec<f64>> =
        (0..test_values.rows()).map(|n| test_values.row(n).to_vec()).collect();
    let basis = StructuredBasis::new(info.kind, &info.group_sizes, rows)?;
    Ok(TrainingDataset::from_parts(basis, snapshots, truth_weights, regularization)?)
}

/// Compressed-data sidecar: the compression error, retained rank, spectrum,
/// and prolongation bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompressedInfo {
    pub schema_version: u32,
    pub kind: CaseKind,
    pub k_thin: usize,
    pub compression_error: f64,
    pub prolongation_norm_bound: f64,
    pub degenerate_truncation: bool,
    pub singular_values: Vec<f64>,
}

pub fn compressed_dir(dir: &Path, kind: CaseKind) -> PathBuf {
    dir.join(format!("compressed-{}", kind.as_str()))
}

pub fn save_compressed(dir: &Path, cds: &CompressedDataset) -> Result<(), StoreError> {
    let root = compressed_dir(dir, cds.kind);
    fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
    hrmx::write_matrix(&root.join("a_thin.hrmx"), &cds.a_thin)?;
    hrmx::write_matrix(&root.join("retained_factor.hrmx"), &cds.retained_factor)?;
    hrmx::write_matrix(&root.join("right_factor.hrmx"), &cds.right_factor)?;
    write_json(
        &root.join("sidecar.json"),
        &CompressedInfo {
            schema_version: SCHEMA_VERSION,
            kind: cds.kind,
            k_thin: cds.k_thin,
            compression_error: cds.compression_error,
            prolongation_norm_bound: cds.prolongation_norm_bound,
            degenerate_truncation: cds.degenerate_truncation,
            singular_values: cds.singular_values.clone(),
        },
    )
}

/// Rebuilds a compressed dataset from its sidecar plus the source dataset
/// (for the truth weights, regularization, and activity mask).
pub fn load_compressed(dir: &Path, ds: &TrainingDataset) -> Result<CompressedDataset, StoreError> {
    let root = compressed_dir(dir, ds.kind());
    let info: CompressedInfo = read_json(&root.join("sidecar.json"))?;
    if info.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaMismatch {
            path: root.join("sidecar.json").display().to_string(),
            found: info.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(CompressedDataset {
        kind: info.kind,
        a_thin: hrmx::read_matrix(&root.join("a_thin.hrmx"))?,
        compression_error: info.compression_error,
        k_thin: info.k_thin,
        singular_values: info.singular_values,
        retained_factor: hrmx::read_matrix(&root.join("retained_factor.hrmx"))?,
        right_factor: hrmx::read_matrix(&root.join("right_factor.hrmx"))?,
        prolongation_norm_bound: info.prolongation_norm_bound,
        degenerate_truncation: info.degenerate_truncation,
        truth_weights: ds.truth_weights().to_vec(),
        regularization: ds.regularization().to_vec(),
        num_summands: ds.num_summands(),
        num_snapshots: ds.num_snapshots(),
        num_test_functions: ds.num_test_functions(),
        active_summands: ds.basis().active_summands().to_vec(),
    })
}

/// Serialized sparse rule with training provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleFile {
    pub schema_version: u32,
    pub case: CaseKind,
    pub mode: super::config::TrainMode,
    pub requested_cardinality: usize,
    pub num_summands: usize,
    /// Selected summands in selection order.
    pub indices: Vec<usize>,
    /// Weights aligned with `indices`.
    pub weights: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub early_stop: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_thin: Option<usize>,
}

impl RuleFile {
    pub fn from_rule(
        rule: &SparseRule,
        case: CaseKind,
        mode: super::config::TrainMode,
        requested_cardinality: usize,
        k_thin: Option<usize>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            case,
            mode,
            requested_cardinality,
            num_summands: rule.num_summands,
            indices: rule.indices.clone(),
            weights: rule.indices.iter().map(|&j| rule.weights[j]).collect(),
            residual_history: rule.residual_history.clone(),
            final_residual: rule.final_residual,
            early_stop: rule.early_stop.map(|e| {
                match e {
                    EarlyStop::NoDescentCandidate => "no-descent-candidate",
                    EarlyStop::ToleranceReached => "tolerance-reached",
                }
                .to_string()
            }),
            k_thin,
        }
    }

    pub fn to_rule(&self) -> SparseRule {
        let mut weights = vec![0.0; self.num_summands];
        for (&j, &w) in self.indices.iter().zip(&self.weights) {
            weights[j] = w;
        }
        SparseRule {
            indices: self.indices.clone(),
            weights,
            residual_history: self.residual_history.clone(),
            final_residual: self.final_residual,
            early_stop: match self.early_stop.as_deref() {
                Some("no-descent-candidate") => Some(EarlyStop::NoDescentCandidate),
                Some("tolerance-reached") => Some(EarlyStop::ToleranceReached),
                _ => None,
            },
            num_summands: self.num_summands,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let file: RuleFile = read_json(path)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(StoreError::SchemaMismatch {
                path: path.display().to_string(),
                found: file.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(file)
    }
}
