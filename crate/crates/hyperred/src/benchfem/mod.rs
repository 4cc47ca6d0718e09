//! Desk-scale nonlinear reaction-diffusion benchmark on the unit interval.
//!
//! P1 finite elements on a uniform mesh, implicit Euler with a Newton solve
//! per step, saturating reaction kinetics, a parametrized initial profile and
//! Neumann flux at the right endpoint. Supplies snapshot data for rule
//! training, a POD-based reduced model, and the complexity-reduced model that
//! consumes trained sparse rules.

mod dataset;
mod fom;
mod pod;
mod rom;

pub use dataset::{cell_training_data, quadrature_training_data};
pub use fom::{mass_matrix, run_fom, stiffness_matrix, total_mass, FomSolution, TriDiag};
pub use pod::pod_basis;
pub use rom::{lift, run_crom, run_rom, spacetime_l2_error, RomOperators};

use crate::kernels::DenseMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("Newton failed to converge at step {step} (residual {residual:.3e})")]
    NewtonDiverged { step: usize, residual: f64 },
    #[error("reaction term has a pole at density -2")]
    PoleInput,
    #[error("trajectories live on different time grids")]
    GridMismatch,
    #[error("relative error against a zero reference trajectory")]
    InfiniteRelError,
    #[error("requested basis size {requested} exceeds snapshot rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("unsupported quadrature order {0} (supported: 1, 2, 3)")]
    UnsupportedQuadratureOrder(usize),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Manifold(#[from] crate::manifold::ManifoldError),
}

/// Newton iteration controls for the implicit Euler steps.
#[derive(Debug, Clone, Copy)]
pub struct NewtonParams {
    /// Convergence when the residual norm drops below
    /// `abs_tol + rel_tol * scale` with `scale` the step's balance magnitude.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_iters: 25 }
    }
}

/// Initial density profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    /// Scenario-blended pair of Gaussians centered at 0.5.
    TwoGaussian,
    /// Spatially constant state (solver verification hook).
    Constant(f64),
}

/// One scenario of the 1D reaction-diffusion problem.
#[derive(Debug, Clone)]
pub struct FomProblem {
    pub n_cells: usize,
    /// Scalar diffusion coefficient, positive.
    pub diffusion: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Scenario parameter blending initial and boundary data, in [0, 1].
    pub scenario: f64,
    /// Gauss points per cell for the truth quadrature.
    pub quad_order: usize,
    pub newton: NewtonParams,
    pub initial: InitialProfile,
    /// Disabling the reaction or the flux turns the run into one of the
    /// conservation/verification configurations used by the tests.
    pub with_reaction: bool,
    pub with_flux: bool,
}

impl FomProblem {
    /// Benchmark defaults: 2000 cells, unit diffusion, dt = 0.002 up to
    /// t = 1.5, 2-point Gauss truth quadrature.
    pub fn benchmark(scenario: f64) -> Self {
        Self {
            n_cells: 2000,
            diffusion: 1.0,
            dt: 0.002,
            t_end: 1.5,
            scenario,
            quad_order: 2,
            newton: NewtonParams::default(),
            initial: InitialProfile::TwoGaussian,
            with_reaction: true,
            with_flux: true,
        }
    }

    /// Number of implicit Euler steps.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Number of spatial degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.n_cells + 1
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Node coordinate.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.cell_width()
    }

    pub fn quadrature(&self) -> Result<TruthQuadrature, FemError> {
        TruthQuadrature::new(self.n_cells, self.quad_order)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        (0..self.dofs())
            .map(|i| match self.initial {
                InitialProfile::TwoGaussian => initial_condition(self.node(i), self.scenario),
                InitialProfile::Constant(c) => c,
            })
            .collect()
    }
}

/// Scenario-blended initial density.
pub fn initial_condition(xi: f64, c: f64) -> f64 {
    let d = xi - 0.5;
    (1.0 - c) * (-d * d / 0.1).exp() + c * (-d * d / 0.5).exp()
}

/// Saturating reaction kinetics.
pub fn reaction(rho: f64) -> Result<f64, FemError> {
    let denom = 1.0 + 0.5 * rho;
    if denom.abs() < 1e-14 {
        return Err(FemError::PoleInput);
    }
    Ok(rho / denom)
}

/// Derivative of the reaction term, for the Newton linearization.
pub fn reaction_derivative(rho: f64) -> Result<f64, FemError> {
    let denom = 1.0 + 0.5 * rho;
    if denom.abs() < 1e-14 {
        return Err(FemError::PoleInput);
    }
    Ok(1.0 / (denom * denom))
}

/// Trace of the first boundary-load function at the right endpoint.
const FLUX_G1: f64 = 1.0;

/// Trace of the second boundary-load function at the right endpoint:
/// sin(1) + cos(6) * (0.3 - 1).
fn flux_g2() -> f64 {
    1.0f64.sin() + 6.0f64.cos() * (0.3 - 1.0)
}

/// Scenario-blended Neumann flux at the right endpoint.
pub fn boundary_flux(t: f64, c: f64) -> f64 {
    (1.0 - c) * FLUX_G1 * (6.0 * t).sin() + c * flux_g2() * (t - 0.2) * (4.0 * t).cos()
}

/// Truth quadrature: per-cell Gauss points on the uniform mesh.
#[derive(Debug, Clone)]
pub struct TruthQuadrature {
    pub n_cells: usize,
    pub points_per_cell: usize,
    /// Global point coordinates, cell by cell.
    pub points: Vec<f64>,
    /// Global point weights (reference weight times cell width).
    pub weights: Vec<f64>,
    /// Reference coordinates in [0, 1] within each cell.
    pub local_coords: Vec<f64>,
}

impl TruthQuadrature {
    pub fn new(n_cells: usize, order: usize) -> Result<Self, FemError> {
        let reference: Vec<(f64, f64)> = match order {
            1 => vec![(0.5, 1.0)],
            2 => {
                let d = 1.0 / (2.0 * 3.0f64.sqrt());
                vec![(0.5 - d, 0.5), (0.5 + d, 0.5)]
            }
            3 => {
                let d = 0.5 * 0.6f64.sqrt();
                vec![(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
            }
            other => return Err(FemError::UnsupportedQuadratureOrder(other)),
        };
        let h = 1.0 / n_cells as f64;
        let mut points = Vec::with_capacity(n_cells * reference.len());
        let mut weights = Vec::with_capacity(n_cells * reference.len());
        let mut local_coords = Vec::with_capacity(n_cells * reference.len());
        for cell in 0..n_cells {
            for &(xi, w) in &reference {
                points.push((cell as f64 + xi) * h);
                weights.push(w * h);
                local_coords.push(xi);
            }
        }
        Ok(Self { n_cells, points_per_cell: reference.len(), points, weights, local_coords })
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Cell owning global point `m`.
    pub fn cell_of(&self, m: usize) -> usize {
        m / self.points_per_cell
    }

    /// Values of the two local hat functions at global point `m`.
    pub fn hat_values(&self, m: usize) -> (f64, f64) {
        let xi = self.local_coords[m];
        (1.0 - xi, xi)
    }
}

/// Time-indexed sequence of coefficient vectors (full or reduced).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One column per time point.
    pub states: DenseMatrix,
}

/// Strided training snapshots of one scenario run: states for the POD and
/// nonlinearity evaluations at the truth quadrature points for the rule
/// training.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub scenario: f64,
    pub times: Vec<f64>,
    /// `dofs x K`.
    pub states: DenseMatrix,
    /// `num_quad_points x K`.
    pub nonlinearity: DenseMatrix,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// POD reduction basis with orthonormal columns.
#[derive(Debug, Clone)]
pub struct RomBasis {
    /// `dofs x n_r`.
    pub v: DenseMatrix,
    /// Full singular spectrum of the state snapshot matrix.
    pub singular_values: Vec<f64>,
}

impl RomBasis {
    pub fn n_r(&self) -> usize {
        self.v.cols()
    }

    pub fn dofs(&self) -> usize {
        self.v.rows()
    }
}
