//! Proper orthogonal decomposition of state snapshots.

use super::{FemError, RomBasis, SnapshotSet};
use crate::kernels::{self, DenseMatrix};

/// Builds the reduction basis from the leading left singular vectors of the
/// state snapshot matrix (columns joined over all supplied sets).
pub fn pod_basis(sets: &[SnapshotSet], n_r: usize) -> Result<RomBasis, FemError> {
    let dofs = sets.first().map(|s| s.states.rows()).unwrap_or(0);
    let total: usize = sets.iter().map(|s| s.states.cols()).sum();
    if dofs == 0 || total == 0 {
        return Err(FemError::DimensionMismatch { what: "snapshot sets", expected: 1, got: 0 });
    }
    let mut states = DenseMatrix::zeros(dofs, total);
    let mut col = 0;
    for set in sets {
        if set.states.rows() != dofs {
            return Err(FemError::DimensionMismatch {
                what: "snapshot rows",
                expected: dofs,
                got: set.states.rows(),
            });
        }
        for k in 0..set.states.cols() {
            for i in 0..dofs {
                states.set(i, col, set.states.get(i, k));
            }
            col += 1;
        }
    }
    pod_of_matrix(&states, n_r)
}

/// POD of an explicit snapshot matrix.
pub fn pod_of_matrix(states: &DenseMatrix, n_r: usize) -> Result<RomBasis, FemError> {
    let max = states.rows().min(states.cols());
    if n_r < 1 || n_r > max {
        return Err(FemError::RankDeficient { requested: n_r, rank: max });
    }
    let svd = kernels::truncated_svd(states, n_r)?;
    // Smooth parabolic snapshot spectra decay to a roundoff plateau a couple
    // of decades above machine epsilon; modes above that plateau are real.
    // The guard only rejects directions that are rounding artifacts.
    let rank_tol = 1e-15 * svd.singular_values[0].max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().take_while(|&&s| s > rank_tol).count();
    if n_r > rank {
        return Err(FemError::RankDeficient { requested: n_r, rank });
    }
    Ok(RomBasis { v: svd.left, singular_values: svd.singular_values })
}
