//! Full-order model: P1 assembly and the implicit Euler / Newton integrator.

use super::{
    boundary_flux, reaction, reaction_derivative, FemError, FomProblem, SnapshotSet, Trajectory,
    TruthQuadrature,
};
use crate::kernels::{norm2, DenseMatrix};

/// Symmetric tridiagonal matrix with a Thomas-algorithm solver. The FOM mass,
/// stiffness, and Newton matrices all live here; the Jacobian is symmetric
/// positive definite for the benchmark's step sizes, so no pivoting is
/// needed.
#[derive(Debug, Clone)]
pub struct TriDiag {
    pub diag: Vec<f64>,
    /// Sub/super-diagonal (symmetric), length `diag.len() - 1`.
    pub off: Vec<f64>,
}

impl TriDiag {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// Solves `self * x = b` by LU without pivoting (Thomas algorithm).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut c = vec![0.0; n]; // modified super-diagonal
        let mut d = vec![0.0; n]; // modified rhs
        let mut denom = self.diag[0];
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n.saturating_sub(1)).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        x
    }

    /// `self + scale * other`, matching layouts.
    pub fn add_scaled(&self, scale: f64, other: &TriDiag) -> TriDiag {
        TriDiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + scale * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + scale * b).collect(),
        }
    }
}

/// P1 mass matrix on the uniform mesh.
pub fn mass_matrix(n_cells: usize) -> TriDiag {
    let h = 1.0 / n_cells as f64;
    let n = n_cells + 1;
    let mut m = TriDiag::zeros(n);
    for c in 0..n_cells {
        m.diag[c] += h / 3.0;
        m.diag[c + 1] += h / 3.0;
        m.off[c] += h / 6.0;
    }
    m
}

/// P1 stiffness matrix (Neumann: zero row sums).
pub fn stiffness_matrix(n_cells: usize) -> TriDiag {
    let h = 1.0 / n_cells as f64;
    let n = n_cells + 1;
    let mut s = TriDiag::zeros(n);
    for c in 0..n_cells {
        s.diag[c] += 1.0 / h;
        s.diag[c + 1] += 1.0 / h;
        s.off[c] -= 1.0 / h;
    }
    s
}

/// Nonlinear load vector `F_n = sum_m w_m f(rho(x_m)) phi_n(x_m)` and, when a
/// slot is supplied, the tridiagonal linearization
/// `J_nl = sum_m w_m f'(rho(x_m)) phi_n(x_m) phi_l(x_m)`.
fn assemble_reaction(
    quad: &TruthQuadrature,
    state: &[f64],
    load: &mut [f64],
    mut jacobian: Option<&mut TriDiag>,
) -> Result<(), FemError> {
    load.iter_mut().for_each(|v| *v = 0.0);
    if let Some(j) = jacobian.as_deref_mut() {
        j.diag.iter_mut().for_each(|v| *v = 0.0);
        j.off.iter_mut().for_each(|v| *v = 0.0);
    }
    for m in 0..quad.num_points() {
        let cell = quad.cell_of(m);
        let (hl, hr) = quad.hat_values(m);
        let rho = state[cell] * hl + state[cell + 1] * hr;
        let w = quad.weights[m];
        let f = reaction(rho)?;
        load[cell] += w * f * hl;
        load[cell + 1] += w * f * hr;
        if let Some(j) = jacobian.as_deref_mut() {
            let fp = reaction_derivative(rho)?;
            j.diag[cell] += w * fp * hl * hl;
            j.diag[cell + 1] += w * fp * hr * hr;
            j.off[cell] += w * fp * hl * hr;
        }
    }
    Ok(())
}

/// Nonlinearity evaluated at every truth quadrature point.
fn nonlinearity_at_points(quad: &TruthQuadrature, state: &[f64]) -> Result<Vec<f64>, FemError> {
    (0..quad.num_points())
        .map(|m| {
            let cell = quad.cell_of(m);
            let (hl, hr) = quad.hat_values(m);
            reaction(state[cell] * hl + state[cell + 1] * hr)
        })
        .collect()
}

/// Full trajectory plus the strided training snapshots of one scenario run.
#[derive(Debug, Clone)]
pub struct FomSolution {
    pub trajectory: Trajectory,
    pub snapshots: SnapshotSet,
}

/// Integrates the full-order model with implicit Euler, one Newton solve per
/// step, recording a snapshot every `snapshot_stride` steps.
pub fn run_fom(p: &FomProblem, snapshot_stride: usize) -> Result<FomSolution, FemError> {
    let quad = p.quadrature()?;
    let n = p.dofs();
    let steps = p.steps();
    let mass = mass_matrix(p.n_cells);
    let stiffness = stiffness_matrix(p.n_cells);

    let mut state = p.initial_state();
    let mut traj_states = DenseMatrix::zeros(n, steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    for i in 0..n {
        traj_states.set(i, 0, state[i]);
    }
    times.push(0.0);

    let snap_count = steps.checked_div(snapshot_stride).unwrap_or(0);
    let mut snap_states = DenseMatrix::zeros(n, snap_count);
    let mut snap_nonlin = DenseMatrix::zeros(quad.num_points(), snap_count);
    let mut snap_times = Vec::with_capacity(snap_count);
    let mut snap_idx = 0;

    let mut reaction_load = vec![0.0; n];
    let mut reaction_jac = TriDiag::zeros(n);

    for step in 1..=steps {
        let t_new = step as f64 * p.dt;
        let flux = if p.with_flux { boundary_flux(t_new, p.scenario) } else { 0.0 };
        let prev = state.clone();
        let scale = 1.0 + norm2(&mass.matvec(&prev));

        let mut converged = false;
        let mut residual_norm = f64::INFINITY;
        for _ in 0..p.newton.max_iters {
            if p.with_reaction {
                assemble_reaction(&quad, &state, &mut reaction_load, Some(&mut reaction_jac))?;
            }
            // Residual of the implicit Euler step:
            // M (y - x_prev) - dt (-D S y + flux e_N + F(y)).
            let m_dy = mass.matvec(&state);
            let m_prev = mass.matvec(&prev);
            let s_y = stiffness.matvec(&state);
            let mut residual = vec![0.0; n];
            for i in 0..n {
                let mut rhs = -p.diffusion * s_y[i];
                if p.with_reaction {
                    rhs += reaction_load[i];
                }
                residual[i] = m_dy[i] - m_prev[i] - p.dt * rhs;
            }
            residual[n - 1] -= p.dt * flux;

            residual_norm = norm2(&residual);
            if residual_norm <= p.newton.abs_tol + p.newton.rel_tol * scale {
                converged = true;
                break;
            }

            // J = M + dt (D S - F'(y)).
            let mut jac = mass.add_scaled(p.dt * p.diffusion, &stiffness);
            if p.with_reaction {
                jac = jac.add_scaled(-p.dt, &reaction_jac);
            }
            let delta = jac.solve(&residual);
            for i in 0..n {
                state[i] -= delta[i];
            }
        }
        if !converged {
            return Err(FemError::NewtonDiverged { step, residual: residual_norm });
        }

        for i in 0..n {
            traj_states.set(i, step, state[i]);
        }
        times.push(t_new);

        if snapshot_stride > 0 && step % snapshot_stride == 0 && snap_idx < snap_count {
            let g = nonlinearity_at_points(&quad, &state)?;
            for i in 0..n {
                snap_states.set(i, snap_idx, state[i]);
            }
            for (row, &value) in g.iter().enumerate() {
                snap_nonlin.set(row, snap_idx, value);
            }
            snap_times.push(t_new);
            snap_idx += 1;
        }
    }

    Ok(FomSolution {
        trajectory: Trajectory { times, states: traj_states },
        snapshots: SnapshotSet {
            scenario: p.scenario,
            times: snap_times,
            states: snap_states,
            nonlinearity: snap_nonlin,
        },
    })
}

/// Total mass `1^T M x` of a state.
pub fn total_mass(mass: &TriDiag, state: &[f64]) -> f64 {
    mass.matvec(state).iter().sum()
}
