//! Command implementations behind the CLI subcommands. Each returns a
//! serializable summary; the binary prints it as JSON.

use super::config::{BenchmarkConfig, TrainMode};
use super::report::{self, CromEvalRow, TrainingReport};
use super::store::{self, RuleFile, RunManifest, StoreError, Timings};
use crate::benchfem::{self, FemError};
use crate::bounds;
use crate::compression::{self, CompressionError};
use crate::manifold::{self, CaseKind, ManifoldError};
use crate::training::{self, TrainingError};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const DEFAULT_MEM_BUDGET: u64 = 2 * 1024 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Compression(#[from] CompressionError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Bound(#[from] crate::bounds::BoundError),
    #[error("rank selection: pass exactly one of --kthin or --rel-tol")]
    RankSelection,
    #[error("no dataset of kind {0:?} in the data directory; run `assemble` first")]
    DatasetMissing(CaseKind),
    #[error("no inputs supplied")]
    NoInputs,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Rank selection for the compression stage: a fixed retained rank or a
/// relative tail-energy tolerance.
#[derive(Debug, Clone, Copy)]
pub enum RankSelection {
    Fixed(usize),
    Tolerance(f64),
}

impl RankSelection {
    pub fn from_flags(kthin: Option<usize>, rel_tol: Option<f64>) -> Result<Self, CommandError> {
        match (kthin, rel_tol) {
            (Some(k), None) => Ok(RankSelection::Fixed(k)),
            (None, Some(t)) => Ok(RankSelection::Tolerance(t)),
            (None, None) => Ok(RankSelection::Tolerance(1e-6)),
            (Some(_), Some(_)) => Err(CommandError::RankSelection),
        }
    }

    fn compress(
        &self,
        ds: &manifold::TrainingDataset,
    ) -> Result<compression::CompressedDataset, CompressionError> {
        match self {
            RankSelection::Fixed(k) => compression::compress(ds, *k),
            RankSelection::Tolerance(t) => compression::compress_to_tolerance(ds, *t),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GenSummary {
    pub out_dir: String,
    pub dofs: usize,
    pub quad_points: usize,
    pub snapshots: usize,
    pub n_r: usize,
    pub scenarios: Vec<f64>,
    pub timings: Timings,
}

/// Runs every training scenario, builds the POD basis, and persists
/// snapshots, basis, and manifest.
pub fn cmd_gen_snapshots(
    config: &BenchmarkConfig,
    seed: u64,
    out: &Path,
) -> Result<GenSummary, CommandError> {
    config.validate()?;
    let t_fom = Instant::now();
    let mut sets = Vec::new();
    for &scenario in &config.training_scenarios {
        let problem = config.problem(scenario);
        let solution = benchfem::run_fom(&problem, config.snapshot_stride)?;
        sets.push(solution.snapshots);
    }
    let fom_ms = ms(t_fom);
    let t_pod = Instant::now();
    let basis = benchfem::pod_basis(&sets, config.n_r)?;
    let timings =
        Timings { fom_ms: Some(fom_ms), pod_ms: Some(ms(t_pod)), ..Timings::default() };
    let manifest = store::save_run(out, seed, config, &sets, &basis, timings.clone())?;
    manifest.validate(out)?;
    Ok(GenSummary {
        out_dir: out.display().to_string(),
        dofs: manifest.dofs,
        quad_points: manifest.quad_points,
        snapshots: manifest.snapshots,
        n_r: manifest.n_r,
        scenarios: config.training_scenarios.clone(),
        timings,
    })
}

/// Reconstructs per-scenario snapshot sets from the stored concatenation.
fn load_snapshot_sets(
    dir: &Path,
    manifest: &RunManifest,
) -> Result<Vec<benchfem::SnapshotSet>, CommandError> {
    let states = store::load_state_snapshots(dir, manifest)?;
    let nonlin = store::load_nonlinearity_snapshots(dir, manifest)?;
    let mut sets = Vec::new();
    for segment in &manifest.segments {
        let mut s = crate::kernels::DenseMatrix::zeros(states.rows(), segment.count);
        let mut g = crate::kernels::DenseMatrix::zeros(nonlin.rows(), segment.count);
        for k in 0..segment.count {
            for i in 0..states.rows() {
                s.set(i, k, states.get(i, segment.start + k));
            }
            for q in 0..nonlin.rows() {
                g.set(q, k, nonlin.get(q, segment.start + k));
            }
        }
        sets.push(benchfem::SnapshotSet {
            scenario: segment.scenario,
            times: Vec::new(),
            states: s,
            nonlinearity: g,
        });
    }
    Ok(sets)
}

#[derive(Debug, Serialize)]
pub struct AssembleSummary {
    pub case: CaseKind,
    pub num_summands: usize,
    pub nodal_dim: usize,
    pub num_snapshots: usize,
    pub num_test_functions: usize,
    pub dense_bytes: u64,
}

/// Builds the training dataset of the requested kind from stored snapshots
/// and basis, and persists it next to them.
pub fn cmd_assemble(data_dir: &Path, case: CaseKind) -> Result<AssembleSummary, CommandError> {
    let manifest = RunManifest::load(data_dir)?;
    manifest.validate(data_dir)?;
    let basis = store::load_basis(data_dir, &manifest)?;
    let sets = load_snapshot_sets(data_dir, &manifest)?;
    let problem = manifest.config.problem(manifest.config.test_scenario);
    let ds = match case {
        CaseKind::Quadrature => benchfem::quadrature_training_data(&problem, &basis, &sets)?,
        CaseKind::CellGeneral => benchfem::cell_training_data(&problem, &basis, &sets, false)?,
        CaseKind::CellSimplified => benchfem::cell_training_data(&problem, &basis, &sets, true)?,
    };
    store::save_dataset(data_dir, case, &ds)?;
    Ok(AssembleSummary {
        case,
        num_summands: ds.num_summands(),
        nodal_dim: ds.basis().nodal_dim(),
        num_snapshots: ds.num_snapshots(),
        num_test_functions: ds.num_test_functions(),
        dense_bytes: manifold::dense_manifold_bytes(&ds),
    })
}

fn load_dataset_checked(
    data_dir: &Path,
    case: CaseKind,
) -> Result<manifold::TrainingDataset, CommandError> {
    if !store::dataset_dir(data_dir, case).join("info.json").exists() {
        return Err(CommandError::DatasetMissing(case));
    }
    Ok(store::load_dataset(data_dir, case)?)
}

#[derive(Debug, Serialize)]
pub struct CompressSummary {
    pub case: CaseKind,
    pub k_thin: usize,
    pub num_snapshots: usize,
    pub compression_error: f64,
    pub effective_compression_error: f64,
    pub equations_standard: usize,
    pub equations_compressed: usize,
    pub compression_ratio: f64,
    pub degenerate_truncation: bool,
    pub compression_ms: f64,
}

/// Compresses a stored dataset and persists the thin data plus sidecar.
pub fn cmd_compress(
    data_dir: &Path,
    case: CaseKind,
    selection: RankSelection,
) -> Result<CompressSummary, CommandError> {
    let ds = load_dataset_checked(data_dir, case)?;
    let t = Instant::now();
    let cds = selection.compress(&ds)?;
    let compression_ms = ms(t);
    store::save_compressed(data_dir, &cds)?;
    Ok(CompressSummary {
        case,
        k_thin: cds.k_thin,
        num_snapshots: cds.num_snapshots,
        compression_error: cds.compression_error,
        effective_compression_error: cds.effective_compression_error(),
        equations_standard: cds.num_snapshots * cds.num_test_functions,
        equations_compressed: cds.equations(),
        compression_ratio: cds.k_thin as f64 / cds.num_snapshots as f64,
        degenerate_truncation: cds.degenerate_truncation,
        compression_ms,
    })
}

/// Trains a rule in the requested mode and writes rule + report files.
#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    data_dir: &Path,
    case: CaseKind,
    mode: TrainMode,
    cardinality: usize,
    selection: RankSelection,
    stop_tol: f64,
    mem_budget: u64,
) -> Result<TrainingReport, CommandError> {
    let ds = load_dataset_checked(data_dir, case)?;
    let dense_bytes = manifold::dense_manifold_bytes(&ds);
    let mut timings = Timings::default();

    let (problem, k_thin, compression_error, cds) = match mode {
        TrainMode::Standard => {
            let t = Instant::now();
            let dense = manifold::assemble_dense(&ds, mem_budget)?;
            timings.assembly_ms = Some(ms(t));
            (training::build_ls_standard(dense, &ds)?, None, None, None)
        }
        TrainMode::Compressed => {
            let t = Instant::now();
            let cds = selection.compress(&ds)?;
            timings.compression_ms = Some(ms(t));
            store::save_compressed(data_dir, &cds)?;
            let p = training::build_ls_compressed(&cds)?;
            (p, Some(cds.k_thin), Some(cds.effective_compression_error()), Some(cds))
        }
    };

    let t = Instant::now();
    let rule = training::omp_train(&problem, cardinality, stop_tol)?;
    timings.training_ms = Some(ms(t));

    // Full-data residual when the dense oracle fits the budget.
    let full_residual = match training::residual_standard(&ds, &rule, mem_budget) {
        Ok(v) => Some(v),
        Err(TrainingError::Manifold(ManifoldError::MemoryBudgetExceeded { .. })) => None,
        Err(e) => return Err(e.into()),
    };
    let bound_report = match &cds {
        Some(c) => Some(bounds::aposteriori(c, &rule)?),
        None => None,
    };

    let rule_name = format!("rule-{}-{}-mc{}.json", case.as_str(), mode.as_str(), cardinality);
    let rule_file = RuleFile::from_rule(&rule, case, mode, cardinality, k_thin);
    rule_file.save(&data_dir.join(&rule_name))?;

    let equations = problem.operator().rows() - 1;
    let report = TrainingReport {
        schema_version: store::SCHEMA_VERSION,
        case,
        mode,
        num_summands: ds.num_summands(),
        nodal_dim: ds.basis().nodal_dim(),
        num_snapshots: ds.num_snapshots(),
        num_test_functions: ds.num_test_functions(),
        k_thin,
        cardinality,
        equations,
        compression_error,
        training_residual: rule.final_residual,
        full_residual,
        bounds: bound_report,
        dense_bytes,
        operator_bytes: 8 * equations as u64 * ds.num_summands() as u64,
        compression_ratio: k_thin
            .map(|k| k as f64 / ds.num_snapshots() as f64)
            .unwrap_or(1.0),
        timings,
        rule_file: rule_name.clone(),
    };
    report.save(&data_dir.join(format!(
        "train-report-{}-{}-mc{}.json",
        case.as_str(),
        mode.as_str(),
        cardinality
    )))?;
    Ok(report)
}

/// Evaluates the bound report for a stored rule against a compressed dataset
/// (recompressing under `selection` when no sidecar is stored yet).
pub fn cmd_bound(
    data_dir: &Path,
    rule_path: &Path,
    selection: RankSelection,
) -> Result<bounds::BoundReport, CommandError> {
    let rule_file = RuleFile::load(rule_path)?;
    let ds = load_dataset_checked(data_dir, rule_file.case)?;
    let sidecar = store::compressed_dir(data_dir, rule_file.case).join("sidecar.json");
    let cds = if sidecar.exists() {
        store::load_compressed(data_dir, &ds)?
    } else {
        selection.compress(&ds)?
    };
    Ok(bounds::aposteriori(&cds, &rule_file.to_rule())?)
}

#[derive(Debug, Serialize)]
pub struct CromEvalSummary {
    pub scenario: f64,
    pub rom_error: f64,
    pub rows: Vec<CromEvalRow>,
    pub out_csv: String,
}

/// Runs the full model and the complexity-reduced model for each rule on the
/// given scenario, reporting relative space-time errors against the full
/// model.
pub fn cmd_crom_eval(
    data_dir: &Path,
    scenario: Option<f64>,
    rule_paths: &[PathBuf],
    out_csv: &Path,
) -> Result<CromEvalSummary, CommandError> {
    if rule_paths.is_empty() {
        return Err(CommandError::NoInputs);
    }
    let manifest = RunManifest::load(data_dir)?;
    let basis = store::load_basis(data_dir, &manifest)?;
    let scenario = scenario.unwrap_or(manifest.config.test_scenario);
    let problem = manifest.config.problem(scenario);

    let fom = benchfem::run_fom(&problem, 0)?;
    let mass = benchfem::mass_matrix(problem.n_cells);
    let rom_traj = benchfem::run_rom(&problem, &basis)?;
    let rom_error = benchfem::spacetime_l2_error(
        &benchfem::lift(&basis, &rom_traj)?,
        &fom.trajectory,
        &mass,
    )?;

    let mut rows = Vec::new();
    for path in rule_paths {
        let rule_file = RuleFile::load(path)?;
        let rule = rule_file.to_rule();
        let t = Instant::now();
        let crom_traj = benchfem::run_crom(&problem, &basis, &rule, rule_file.case)?;
        let runtime_ms = ms(t);
        let relative_error = benchfem::spacetime_l2_error(
            &benchfem::lift(&basis, &crom_traj)?,
            &fom.trajectory,
            &mass,
        )?;
        rows.push(CromEvalRow {
            case: rule_file.case,
            mode: rule_file.mode,
            cardinality: rule_file.requested_cardinality,
            scenario,
            relative_error,
            runtime_ms,
            rule_file: path.display().to_string(),
        });
    }
    report::write_crom_eval_csv(out_csv, &rows)?;
    Ok(CromEvalSummary {
        scenario,
        rom_error,
        rows,
        out_csv: out_csv.display().to_string(),
    })
}

#[derive(Debug, Serialize)]
pub struct ReportSummary {
    pub rows: usize,
    pub out_csv: String,
    pub out_json: String,
}

/// Aggregates training reports (files, or directories scanned for
/// `train-report-*.json`) into one CSV and JSON table.
pub fn cmd_report(inputs: &[PathBuf], out_base: &Path) -> Result<ReportSummary, CommandError> {
    let mut reports = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|source| StoreError::Io { path: input.display().to_string(), source })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| n.starts_with("train-report-") && n.ends_with(".json"))
                        .unwrap_or(false)
                })
                .collect();
            entries.sort();
            for path in entries {
                reports.push(TrainingReport::load(&path)?);
            }
        } else {
            reports.push(TrainingReport::load(input)?);
        }
    }
    if reports.is_empty() {
        return Err(CommandError::NoInputs);
    }
    let csv_path = out_base.with_extension("csv");
    let json_path = out_base.with_extension("json");
    report::write_report_csv(&csv_path, &reports)?;
    store::write_json(&json_path, &reports)?;
    Ok(ReportSummary {
        rows: reports.len(),
        out_csv: csv_path.display().to_string(),
        out_json: json_path.display().to_string(),
    })
}
