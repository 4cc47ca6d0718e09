//! Bridges benchmark runs to the training-data builders: extracts the
//! test-function evaluations, localized nonlinearity data, and truth weights
//! from snapshots and a reduction basis.

use super::rom::RomOperators;
use super::{FemError, FomProblem, RomBasis, SnapshotSet};
use crate::manifold::{self, TrainingDataset};

/// Quadrature-case training data: one summand per truth quadrature point,
/// candidate weights re-weighting the truth rule.
pub fn quadrature_training_data(
    p: &FomProblem,
    basis: &RomBasis,
    sets: &[SnapshotSet],
) -> Result<TrainingDataset, FemError> {
    let ops = RomOperators::build(p, basis)?;
    let m = ops.num_quad_points();
    let n_r = ops.n_r();
    let point_rows = ops.point_rows();
    let basis_point_values: Vec<Vec<f64>> =
        (0..n_r).map(|n| (0..m).map(|q| point_rows.get(q, n)).collect()).collect();

    let mut snapshots = Vec::new();
    for set in sets {
        if set.nonlinearity.rows() != m {
            return Err(FemError::DimensionMismatch {
                what: "nonlinearity snapshot rows",
                expected: m,
                got: set.nonlinearity.rows(),
            });
        }
        for k in 0..set.nonlinearity.cols() {
            snapshots.push(set.nonlinearity.column(k));
        }
    }
    Ok(manifold::build_quadrature_dataset(&basis_point_values, &snapshots, ops.truth_weights())?)
}

/// Cell-case training data: one summand per mesh cell, nodal groups of the
/// two supported hat functions, local integrals evaluated with the truth
/// quadrature from the stored nonlinearity snapshots.
pub fn cell_training_data(
    p: &FomProblem,
    basis: &RomBasis,
    sets: &[SnapshotSet],
    simplified: bool,
) -> Result<TrainingDataset, FemError> {
    let quad = p.quadrature()?;
    let n_cells = p.n_cells;
    let h = p.cell_width();
    let rom_coeffs: Vec<Vec<f64>> = (0..basis.n_r()).map(|n| basis.v.column(n)).collect();
    let groups: Vec<Vec<usize>> = (0..n_cells).map(|c| vec![c, c + 1]).collect();

    let mut local_integrals = Vec::new();
    for set in sets {
        if set.nonlinearity.rows() != quad.num_points() {
            return Err(FemError::DimensionMismatch {
                what: "nonlinearity snapshot rows",
                expected: quad.num_points(),
                got: set.nonlinearity.rows(),
            });
        }
        for k in 0..set.nonlinearity.cols() {
            let mut row = vec![0.0; 2 * n_cells];
            for q in 0..quad.num_points() {
                let cell = quad.cell_of(q);
                let (hl, hr) = quad.hat_values(q);
                let wf = quad.weights[q] * set.nonlinearity.get(q, k);
                row[2 * cell] += wf * hl;
                row[2 * cell + 1] += wf * hr;
            }
            local_integrals.push(row);
        }
    }
    let measures = vec![h; n_cells];
    let truth = vec![1.0; n_cells];
    Ok(manifold::build_cell_dataset(&rom_coeffs, &groups, &local_integrals, &measures, &truth, simplified)?)
}
