//! Demo pipeline at interactive scale. Pure Rust so the logic is testable on
//! any target; the wasm layer only serializes the results.

use hyperred::benchfem::{
    self, lift, run_crom, run_fom, spacetime_l2_error, FomProblem, InitialProfile, NewtonParams,
    RomBasis,
};
use hyperred::compression::{self, CompressedDataset};
use hyperred::manifold::{self, CaseKind, TrainingDataset};
use hyperred::training::{self, SparseRule};
use serde::Serialize;

pub const TRAINING_SCENARIOS: [f64; 3] = [0.0, 0.5, 1.0];

fn problem(n_cells: usize, scenario: f64) -> FomProblem {
    FomProblem {
        n_cells,
        diffusion: 1.0,
        dt: 0.01,
        t_end: 1.0,
        scenario,
        quad_order: 2,
        newton: NewtonParams::default(),
        initial: InitialProfile::TwoGaussian,
        with_reaction: true,
        with_flux: true,
    }
}

#[derive(Debug, Serialize)]
pub struct SimulationFrames {
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

/// Integrates one scenario and returns subsampled solution frames.
pub fn simulate(n_cells: usize, scenario: f64, max_frames: usize) -> Result<SimulationFrames, String> {
    let p = problem(n_cells, scenario);
    let sol = run_fom(&p, 0).map_err(|e| e.to_string())?;
    let total = sol.trajectory.times.len();
    let stride = (total / max_frames.max(1)).max(1);
    let mut times = Vec::new();
    let mut frames = Vec::new();
    for t in (0..total).step_by(stride) {
        times.push(sol.trajectory.times[t]);
        frames.push(sol.trajectory.states.column(t));
    }
    Ok(SimulationFrames {
        nodes: (0..p.dofs()).map(|i| p.node(i)).collect(),
        times,
        frames,
    })
}

struct Pipeline {
    problem_test: FomProblem,
    basis: RomBasis,
    ds: TrainingDataset,
    cds: CompressedDataset,
}

fn build_pipeline(n_cells: usize, n_r: usize, rel_tol: f64) -> Result<Pipeline, String> {
    let mut sets = Vec::new();
    for &c in &TRAINING_SCENARIOS {
        let sol = run_fom(&problem(n_cells, c), 2).map_err(|e| e.to_string())?;
        sets.push(sol.snapshots);
    }
    let basis = benchfem::pod_basis(&sets, n_r).map_err(|e| e.to_string())?;
    let problem_test = problem(n_cells, 0.75);
    let ds = benchfem::quadrature_training_data(&problem_test, &basis, &sets)
        .map_err(|e| e.to_string())?;
    let cds = compression::compress_to_tolerance(&ds, rel_tol).map_err(|e| e.to_string())?;
    Ok(Pipeline { problem_test, basis, ds, cds })
}

fn train_rule(
    pipeline: &Pipeline,
    m_c: usize,
    compressed: bool,
) -> Result<SparseRule, String> {
    let p = if compressed {
        training::build_ls_compressed(&pipeline.cds).map_err(|e| e.to_string())?
    } else {
        let dense = manifold::assemble_dense(&pipeline.ds, 1 << 30).map_err(|e| e.to_string())?;
        training::build_ls_standard(dense, &pipeline.ds).map_err(|e| e.to_string())?
    };
    let m_c = m_c.clamp(1, p.active_columns().len());
    training::omp_train(&p, m_c, 0.0).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct TrainingResult {
    /// Quadrature point coordinates of the selected summands.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub compression_error: f64,
    pub k_thin: usize,
    pub num_snapshots: usize,
    pub equations_standard: usize,
    pub equations_compressed: usize,
    /// Singular spectrum of the compact product, normalized to the largest.
    pub spectrum: Vec<f64>,
    pub training_residual: f64,
    pub a_posteriori: f64,
}

/// Trains a compressed-mode rule and reports the quantities the demo plots.
pub fn train(n_cells: usize, n_r: usize, m_c: usize, rel_tol: f64) -> Result<TrainingResult, String> {
    let pipeline = build_pipeline(n_cells, n_r, rel_tol)?;
    let rule = train_rule(&pipeline, m_c, true)?;
    let quad = pipeline.problem_test.quadrature().map_err(|e| e.to_string())?;
    let bound = hyperred::bounds::aposteriori(&pipeline.cds, &rule).map_err(|e| e.to_string())?;
    let sigma0 = pipeline.cds.singular_values.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    Ok(TrainingResult {
        points: rule.indices.iter().map(|&m| quad.points[m]).collect(),
        weights: rule.indices.iter().map(|&m| rule.weights[m]).collect(),
        residual_history: rule.residual_history.clone(),
        compression_error: pipeline.cds.compression_error,
        k_thin: pipeline.cds.k_thin,
        num_snapshots: pipeline.ds.num_snapshots(),
        equations_standard: pipeline.ds.num_snapshots() * pipeline.ds.num_test_functions(),
        equations_compressed: pipeline.cds.equations(),
        spectrum: pipeline.cds.singular_values.iter().map(|s| s / sigma0).collect(),
        training_residual: rule.final_residual,
        a_posteriori: bound.a_posteriori,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub cardinality: usize,
    pub standard_error: f64,
    pub compressed_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ErrorSweep {
    pub scenario: f64,
    pub rom_error: f64,
    pub points: Vec<SweepPoint>,
    pub k_thin: usize,
    pub num_snapshots: usize,
}

/// Sweeps rule cardinalities and reports complexity-reduced model errors for
/// standard- and compressed-trained rules against the full model on the test
/// scenario.
pub fn error_sweep(
    n_cells: usize,
    n_r: usize,
    rel_tol: f64,
    cardinalities: &[usize],
) -> Result<ErrorSweep, String> {
    let pipeline = build_pipeline(n_cells, n_r, rel_tol)?;
    let p = &pipeline.problem_test;
    let fom = run_fom(p, 0).map_err(|e| e.to_string())?.trajectory;
    let mass = benchfem::mass_matrix(p.n_cells);
    let error_of = |rule: &SparseRule| -> Result<f64, String> {
        let traj = run_crom(p, &pipeline.basis, rule, CaseKind::Quadrature)
            .map_err(|e| e.to_string())?;
        let lifted = lift(&pipeline.basis, &traj).map_err(|e| e.to_string())?;
        spacetime_l2_error(&lifted, &fom, &mass).map_err(|e| e.to_string())
    };
    let rom = benchfem::run_rom(p, &pipeline.basis).map_err(|e| e.to_string())?;
    let rom_error = spacetime_l2_error(
        &lift(&pipeline.basis, &rom).map_err(|e| e.to_string())?,
        &fom,
        &mass,
    )
    .map_err(|e| e.to_string())?;

    let mut points = Vec::new();
    for &m_c in cardinalities {
        let standard = train_rule(&pipeline, m_c, false)?;
        let compressed = train_rule(&pipeline, m_c, true)?;
        points.push(SweepPoint {
            cardinality: m_c,
            standard_error: error_of(&standard)?,
            compressed_error: error_of(&compressed)?,
        });
    }
    Ok(ErrorSweep {
        scenario: p.scenario,
        rom_error,
        points,
        k_thin: pipeline.cds.k_thin,
        num_snapshots: pipeline.ds.num_snapshots(),
    })
}
