//! Galerkin reduced model and its complexity-reduced variant.
//!
//! Both integrate the same reduced implicit Euler system; they differ only in
//! the summation rule used for the projected nonlinearity. The reduced test
//! and trial bases coincide (orthonormal POD columns), so bi-orthogonality
//! holds trivially.

use super::fom::{mass_matrix, stiffness_matrix, TriDiag};
use super::{boundary_flux, reaction, reaction_derivative, FemError, FomProblem, RomBasis, Trajectory};
use crate::kernels::DenseMatrix;
use crate::manifold::CaseKind;
use crate::training::SparseRule;
use nalgebra::{DMatrix, DVector};

/// Reduced operators of one scenario problem under a fixed basis, plus the
/// quadrature-point evaluations of the reduced basis needed by the
/// nonlinearity rules.
#[derive(Debug, Clone)]
pub struct RomOperators {
    mass_r: DMatrix<f64>,
    stiffness_r: DMatrix<f64>,
    /// Reduced endpoint load: last row of the basis.
    flux_load: Vec<f64>,
    /// `num_quad_points x n_r`: reduced basis evaluated at the truth points.
    point_rows: DenseMatrix,
    truth_weights: Vec<f64>,
    points_per_cell: usize,
    n_r: usize,
}

impl RomOperators {
    pub fn build(p: &FomProblem, basis: &RomBasis) -> Result<Self, FemError> {
        let n = p.dofs();
        if basis.dofs() != n {
            return Err(FemError::DimensionMismatch {
                what: "basis rows",
                expected: n,
                got: basis.dofs(),
            });
        }
        let n_r = basis.n_r();
        let quad = p.quadrature()?;
        let mass = mass_matrix(p.n_cells);
        let stiffness = stiffness_matrix(p.n_cells);

        let project = |op: &TriDiag| -> DMatrix<f64> {
            let mut out = DMatrix::zeros(n_r, n_r);
            for j in 0..n_r {
                let col = basis.v.column(j);
                let op_col = op.matvec(&col);
                for i in 0..n_r {
                    let vi = basis.v.column(i);
                    out[(i, j)] = vi.iter().zip(&op_col).map(|(a, b)| a * b).sum();
                }
            }
            out
        };

        let mut point_rows = DenseMatrix::zeros(quad.num_points(), n_r);
        for m in 0..quad.num_points() {
            let cell = quad.cell_of(m);
            let (hl, hr) = quad.hat_values(m);
            for j in 0..n_r {
                let value = basis.v.get(cell, j) * hl + basis.v.get(cell + 1, j) * hr;
                point_rows.set(m, j, value);
            }
        }

        Ok(Self {
            mass_r: project(&mass),
            stiffness_r: project(&stiffness),
            flux_load: (0..n_r).map(|j| basis.v.get(n - 1, j)).collect(),
            point_rows,
            truth_weights: quad.weights.clone(),
            points_per_cell: quad.points_per_cell,
            n_r,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn num_quad_points(&self) -> usize {
        self.point_rows.rows()
    }

    /// Reduced basis values at the truth quadrature points.
    pub fn point_rows(&self) -> &DenseMatrix {
        &self.point_rows
    }

    pub fn truth_weights(&self) -> &[f64] {
        &self.truth_weights
    }
}

/// A weighted list of quadrature-point contributions: the truth rule for the
/// reduced model, a trained subset for the complexity-reduced one.
struct PointRule {
    /// `(weight, quadrature point index)`.
    entries: Vec<(f64, usize)>,
}

impl PointRule {
    fn truth(ops: &RomOperators) -> Self {
        Self { entries: ops.truth_weights.iter().copied().zip(0..).collect() }
    }

    /// Maps a trained sparse rule onto quadrature-point contributions.
    ///
    /// Quadrature rules select points directly with their trained weights.
    /// Cell rules select cells; each selected cell contributes its truth
    /// points with the trained weight times the truth point weight.
    fn from_sparse(ops: &RomOperators, rule: &SparseRule, kind: CaseKind) -> Result<Self, FemError> {
        let mut entries = Vec::new();
        match kind {
            CaseKind::Quadrature => {
                if rule.num_summands != ops.num_quad_points() {
                    return Err(FemError::DimensionMismatch {
                        what: "rule summands",
                        expected: ops.num_quad_points(),
                        got: rule.num_summands,
                    });
                }
                for &m in &rule.indices {
                    let w = rule.weights[m];
                    if w != 0.0 {
                        entries.push((w, m));
                    }
                }
            }
            CaseKind::CellGeneral | CaseKind::CellSimplified => {
                let n_cells = ops.num_quad_points() / ops.points_per_cell;
                if rule.num_summands != n_cells {
                    return Err(FemError::DimensionMismatch {
                        what: "rule summands",
                        expected: n_cells,
                        got: rule.num_summands,
                    });
                }
                for &cell in &rule.indices {
                    let w = rule.weights[cell];
                    if w == 0.0 {
                        continue;
                    }
                    for local in 0..ops.points_per_cell {
                        let m = cell * ops.points_per_cell + local;
                        entries.push((w * ops.truth_weights[m], m));
                    }
                }
            }
        }
        Ok(Self { entries })
    }

    /// Accumulates the reduced nonlinearity and, if requested, its Jacobian:
    /// `f_n = sum w f(p_m . y) p_m[n]`, `J = sum w f'(p_m . y) p_m p_m^T`.
    fn evaluate(
        &self,
        ops: &RomOperators,
        y: &DVector<f64>,
        mut jacobian: Option<&mut DMatrix<f64>>,
    ) -> Result<DVector<f64>, FemError> {
        let n_r = ops.n_r;
        let mut f_r = DVector::zeros(n_r);
        if let Some(j) = jacobian.as_deref_mut() {
            j.fill(0.0);
        }
        for &(w, m) in &self.entries {
            let row = ops.point_rows.row(m);
            let rho: f64 = row.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let f = reaction(rho)?;
            for (n, &pn) in row.iter().enumerate() {
                f_r[n] += w * f * pn;
            }
            if let Some(j) = jacobian.as_deref_mut() {
                let fp = reaction_derivative(rho)?;
                for (a, &pa) in row.iter().enumerate() {
                    let scale = w * fp * pa;
                    for (b, &pb) in row.iter().enumerate() {
                        j[(a, b)] += scale * pb;
                    }
                }
            }
        }
        Ok(f_r)
    }
}

fn step_reduced(
    p: &FomProblem,
    ops: &RomOperators,
    rule: &PointRule,
    initial_reduced: Vec<f64>,
) -> Result<Trajectory, FemError> {
    let n_r = ops.n_r;
    let steps = p.steps();
    let mut y = DVector::from_vec(initial_reduced);
    let mut states = DenseMatrix::zeros(n_r, steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    for i in 0..n_r {
        states.set(i, 0, y[i]);
    }
    times.push(0.0);

    let mut jac_nl = DMatrix::zeros(n_r, n_r);
    for step in 1..=steps {
        let t_new = step as f64 * p.dt;
        let flux = if p.with_flux { boundary_flux(t_new, p.scenario) } else { 0.0 };
        let prev = y.clone();
        let m_prev = &ops.mass_r * &prev;
        let scale = 1.0 + m_prev.norm();

        let mut converged = false;
        let mut residual_norm = f64::INFINITY;
        for _ in 0..p.newton.max_iters {
            let f_r = if p.with_reaction {
                rule.evaluate(ops, &y, Some(&mut jac_nl))?
            } else {
                DVector::zeros(n_r)
            };
            let mut residual = &ops.mass_r * &y - &m_prev
                + (&ops.stiffness_r * &y) * (p.dt * p.diffusion);
            for i in 0..n_r {
                residual[i] -= p.dt * (flux * ops.flux_load[i] + if p.with_reaction { f_r[i] } else { 0.0 });
            }
            residual_norm = residual.norm();
            if residual_norm <= p.newton.abs_tol + p.newton.rel_tol * scale {
                converged = true;
                break;
            }
            let mut jac = &ops.mass_r + &ops.stiffness_r * (p.dt * p.diffusion);
            if p.with_reaction {
                jac -= &jac_nl * p.dt;
            }
            let delta = jac.lu().solve(&residual).ok_or(FemError::NewtonDiverged {
                step,
                residual: residual_norm,
            })?;
            y -= delta;
        }
        if !converged {
            return Err(FemError::NewtonDiverged { step, residual: residual_norm });
        }
        for i in 0..n_r {
            states.set(i, step, y[i]);
        }
        times.push(t_new);
    }
    Ok(Trajectory { times, states })
}

fn reduced_initial(p: &FomProblem, basis: &RomBasis) -> Vec<f64> {
    let x0 = p.initial_state();
    (0..basis.n_r())
        .map(|j| basis.v.column(j).iter().zip(&x0).map(|(a, b)| a * b).sum())
        .collect()
}

/// Integrates the reduced model with the truth summation rule for the
/// projected nonlinearity. Returns the reduced-coordinate trajectory.
pub fn run_rom(p: &FomProblem, basis: &RomBasis) -> Result<Trajectory, FemError> {
    let ops = RomOperators::build(p, basis)?;
    let rule = PointRule::truth(&ops);
    step_reduced(p, &ops, &rule, reduced_initial(p, basis))
}

/// Integrates the complexity-reduced model: the projected nonlinearity and
/// its Newton linearization are assembled from the trained sparse rule only,
/// so the per-step cost scales with the rule support instead of the truth
/// point count.
pub fn run_crom(
    p: &FomProblem,
    basis: &RomBasis,
    rule: &SparseRule,
    kind: CaseKind,
) -> Result<Trajectory, FemError> {
    let ops = RomOperators::build(p, basis)?;
    let point_rule = PointRule::from_sparse(&ops, rule, kind)?;
    step_reduced(p, &ops, &point_rule, reduced_initial(p, basis))
}

/// Lifts a reduced trajectory back to full coordinates.
pub fn lift(basis: &RomBasis, reduced: &Trajectory) -> Result<Trajectory, FemError> {
    if reduced.states.rows() != basis.n_r() {
        return Err(FemError::DimensionMismatch {
            what: "reduced trajectory rows",
            expected: basis.n_r(),
            got: reduced.states.rows(),
        });
    }
    let states = basis.v.matmul(&reduced.states)?;
    Ok(Trajectory { times: reduced.times.clone(), states })
}

/// Relative space-time L2 distance between a trajectory and a reference, both
/// in full coordinates on the same time grid, weighted by the mass matrix:
/// `sqrt(sum_t dt ||a_t - b_t||_M^2) / sqrt(sum_t dt ||b_t||_M^2)`.
pub fn spacetime_l2_error(
    a: &Trajectory,
    reference: &Trajectory,
    mass: &TriDiag,
) -> Result<f64, FemError> {
    if a.times.len() != reference.times.len()
        || a.times
            .iter()
            .zip(&reference.times)
            .any(|(s, t)| (s - t).abs() > 1e-12 * (1.0 + t.abs()))
        || a.states.rows() != reference.states.rows()
    {
        return Err(FemError::GridMismatch);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..a.times.len() {
        let at = a.states.column(t);
        let bt = reference.states.column(t);
        let diff: Vec<f64> = at.iter().zip(&bt).map(|(x, y)| x - y).collect();
        let m_diff = mass.matvec(&diff);
        num += diff.iter().zip(&m_diff).map(|(x, y)| x * y).sum::<f64>();
        let m_b = mass.matvec(&bt);
        den += bt.iter().zip(&m_b).map(|(x, y)| x * y).sum::<f64>();
    }
    if den <= 0.0 {
        return Err(FemError::InfiniteRelError);
    }
    Ok((num / den).sqrt())
}
