//! Training-data assembly: the truth sum representation of the projected
//! nonlinearity, the regularization vector, and the structured factorization
//! of the solution manifold used by the compression stage.
//!
//! Layout conventions are fixed so permutations are bit-exact:
//! the dense manifold matrix orders rows snapshot-major (row `k*n_r + n`),
//! while the factorized layout orders rows test-function-major
//! (row `n*m + summand`).

use crate::kernels::{DenseMatrix, KernelError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("dimension mismatch building {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("truth weight {index} is not positive ({value})")]
    NonPositiveTruthWeight { index: usize, value: f64 },
    #[error("cell {index} has zero measure")]
    ZeroCellMeasure { index: usize },
    #[error("dataset needs at least one snapshot and one test function")]
    EmptyDataset,
    #[error("cell {index} has an empty node group")]
    EmptyGroup { index: usize },
    #[error("node index {node} of cell {cell} exceeds coefficient length {len}")]
    NodeOutOfRange { cell: usize, node: usize, len: usize },
    #[error("dense manifold needs {required} bytes, over the {budget}-byte budget")]
    MemoryBudgetExceeded { required: u64, budget: u64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which truth sum representation the dataset encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    /// Point evaluations of a quadrature rule; one summand per point.
    Quadrature,
    /// Per-cell integrals decomposed over local node contributions, with the
    /// exact block-structured factorization.
    CellGeneral,
    /// Same cell data, but compression acts on the diagonal nodal factor and
    /// the group sums are applied afterwards.
    CellSimplified,
}

impl CaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseKind::Quadrature => "quadrature",
            CaseKind::CellGeneral => "cell-general",
            CaseKind::CellSimplified => "cell-simplified",
        }
    }
}

/// Structured factor holding the reduced test-function evaluations.
///
/// Column `j` of the implied sparse factor carries the values of all reduced
/// test functions at nodal slot `j`; summand `m` owns the contiguous slot
/// range `group_offsets[m]..group_offsets[m+1]` (singletons for the
/// quadrature case). Summands whose slots are entirely zero are flagged
/// inactive: they cannot influence the projected nonlinearity and are skipped
/// by compression and candidate selection, while their regularization entries
/// remain part of the bookkeeping.
#[derive(Debug, Clone)]
pub struct StructuredBasis {
    kind: CaseKind,
    num_test_functions: usize,
    group_offsets: Vec<usize>,
    /// One vector per reduced test function, each of length `nodal_dim`.
    test_values: Vec<Vec<f64>>,
    active: Vec<bool>,
}

impl StructuredBasis {
    pub fn new(
        kind: CaseKind,
        group_sizes: &[usize],
        test_values: Vec<Vec<f64>>,
    ) -> Result<Self, ManifoldError> {
        if test_values.is_empty() {
            return Err(ManifoldError::EmptyDataset);
        }
        if let Some(index) = group_sizes.iter().position(|&s| s == 0) {
            return Err(ManifoldError::EmptyGroup { index });
        }
        if kind == CaseKind::Quadrature && group_sizes.iter().any(|&s| s != 1) {
            return Err(ManifoldError::DimensionMismatch {
                what: "quadrature group sizes",
                expected: 1,
                got: *group_sizes.iter().find(|&&s| s != 1).unwrap(),
            });
        }
        let mut group_offsets = Vec::with_capacity(group_sizes.len() + 1);
        let mut total = 0;
        group_offsets.push(0);
        for &s in group_sizes {
            total += s;
            group_offsets.push(total);
        }
        for v in &test_values {
            if v.len() != total {
                return Err(ManifoldError::DimensionMismatch {
                    what: "test function values",
                    expected: total,
                    got: v.len(),
                });
            }
        }
        let active = (0..group_sizes.len())
            .map(|m| {
                (group_offsets[m]..group_offsets[m + 1])
                    .any(|j| test_values.iter().any(|v| v[j] != 0.0))
            })
            .collect();
        Ok(Self { kind, num_test_functions: test_values.len(), group_offsets, test_values, active })
    }

    pub fn kind(&self) -> CaseKind {
        self.kind
    }

    /// Number of summands (quadrature points or cells) the rule selects from.
    pub fn num_summands(&self) -> usize {
        self.group_offsets.len() - 1
    }

    pub fn num_test_functions(&self) -> usize {
        self.num_test_functions
    }

    /// Total nodal dimension: sum of group sizes.
    pub fn nodal_dim(&self) -> usize {
        *self.group_offsets.last().unwrap()
    }

    pub fn group_size(&self, m: usize) -> usize {
        self.group_offsets[m + 1] - self.group_offsets[m]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        (0..self.num_summands()).map(|m| self.group_size(m)).collect()
    }

    pub fn group_range(&self, m: usize) -> std::ops::Range<usize> {
        self.group_offsets[m]..self.group_offsets[m + 1]
    }

    pub fn test_value(&self, n: usize, j: usize) -> f64 {
        self.test_values[n][j]
    }

    pub fn test_values(&self) -> &[Vec<f64>] {
        &self.test_values
    }

    pub fn summand_active(&self, m: usize) -> bool {
        self.active[m]
    }

    pub fn active_summands(&self) -> &[bool] {
        &self.active
    }

    /// Whether any test function is nonzero at nodal slot `j`.
    pub fn column_active(&self, j: usize) -> bool {
        self.test_values.iter().any(|v| v[j] != 0.0)
    }

    /// Dense materialization of the factor the structured QR acts on:
    /// `n_r` stacked diagonal blocks for `Quadrature`/`CellSimplified`, and
    /// group-summed blocks for `CellGeneral`. Diagnostic/oracle use only.
    pub fn explicit_compression_factor(&self) -> DenseMatrix {
        match self.kind {
            CaseKind::Quadrature | CaseKind::CellSimplified => {
                let d = self.nodal_dim();
                let mut out = DenseMatrix::zeros(self.num_test_functions * d, d);
                for (n, v) in self.test_values.iter().enumerate() {
                    for (j, &value) in v.iter().enumerate() {
                        out.set(n * d + j, j, value);
                    }
                }
                out
            }
            CaseKind::CellGeneral => self.explicit_manifold_factor(),
        }
    }

    /// Dense materialization of the true manifold factor (rows ordered
    /// test-function-major over summands, columns over nodal slots), i.e. the
    /// matrix whose product with the snapshot columns yields the
    /// test-function-major manifold layout. Diagnostic/oracle use only.
    pub fn explicit_manifold_factor(&self) -> DenseMatrix {
        let m = self.num_summands();
        let mut out = DenseMatrix::zeros(self.num_test_functions * m, self.nodal_dim());
        for (n, v) in self.test_values.iter().enumerate() {
            for mm in 0..m {
                for j in self.group_range(mm) {
                    out.set(n * m + mm, j, v[j]);
                }
            }
        }
        out
    }
}

/// Snapshot training data in the factorized truth-sum representation.
#[derive(Debug, Clone)]
pub struct TrainingDataset {
    basis: StructuredBasis,
    /// Localized nonlinearity evaluations, one column per snapshot
    /// (`nodal_dim x num_snapshots`).
    snapshots: DenseMatrix,
    truth_weights: Vec<f64>,
    /// Regularization vector: the truth sum applied to the constant pair,
    /// entry by entry (all ones for quadrature, cell measures for cells).
    regularization: Vec<f64>,
}

impl TrainingDataset {
    pub fn kind(&self) -> CaseKind {
        self.basis.kind()
    }

    pub fn basis(&self) -> &StructuredBasis {
        &self.basis
    }

    pub fn snapshots(&self) -> &DenseMatrix {
        &self.snapshots
    }

    pub fn num_snapshots(&self) -> usize {
        self.snapshots.cols()
    }

    pub fn num_summands(&self) -> usize {
        self.basis.num_summands()
    }

    pub fn num_test_functions(&self) -> usize {
        self.basis.num_test_functions()
    }

    pub fn truth_weights(&self) -> &[f64] {
        &self.truth_weights
    }

    pub fn regularization(&self) -> &[f64] {
        &self.regularization
    }

    /// Indices of summands eligible for selection.
    pub fn active_columns(&self) -> Vec<usize> {
        (0..self.num_summands()).filter(|&m| self.basis.summand_active(m)).collect()
    }

    pub fn from_parts(
        basis: StructuredBasis,
        snapshots: DenseMatrix,
        truth_weights: Vec<f64>,
        regularization: Vec<f64>,
    ) -> Result<Self, ManifoldError> {
        if snapshots.rows() != basis.nodal_dim() {
            return Err(ManifoldError::DimensionMismatch {
                what: "snapshot rows",
                expected: basis.nodal_dim(),
                got: snapshots.rows(),
            });
        }
        if snapshots.cols() == 0 {
            return Err(ManifoldError::EmptyDataset);
        }
        if truth_weights.len() != basis.num_summands() {
            return Err(ManifoldError::DimensionMismatch {
                what: "truth weights",
                expected: basis.num_summands(),
                got: truth_weights.len(),
            });
        }
        if regularization.len() != basis.num_summands() {
            return Err(ManifoldError::DimensionMismatch {
                what: "regularization vector",
                expected: basis.num_summands(),
                got: regularization.len(),
            });
        }
        if let Some((index, &value)) =
            truth_weights.iter().enumerate().find(|(_, &w)| !(w > 0.0))
        {
            return Err(ManifoldError::NonPositiveTruthWeight { index, value });
        }
        if let Some(index) = regularization.iter().position(|&d| !(d > 0.0)) {
            return Err(ManifoldError::ZeroCellMeasure { index });
        }
        Ok(Self { basis, snapshots, truth_weights, regularization })
    }
}

/// Builds a quadrature-case dataset from per-test-function point values,
/// per-snapshot nonlinearity evaluations, and the truth quadrature weights.
/// The regularization vector is all ones: the constant pair evaluates to one
/// at every point.
pub fn build_quadrature_dataset(
    basis_point_values: &[Vec<f64>],
    nonlinearity_snapshots: &[Vec<f64>],
    truth_weights: &[f64],
) -> Result<TrainingDataset, ManifoldError> {
    if basis_point_values.is_empty() || nonlinearity_snapshots.is_empty() {
        return Err(ManifoldError::EmptyDataset);
    }
    let m = truth_weights.len();
    let basis = StructuredBasis::new(CaseKind::Quadrature, &vec![1; m], basis_point_values.to_vec())?;
    let mut snapshots = DenseMatrix::zeros(m, nonlinearity_snapshots.len());
    for (k, g) in nonlinearity_snapshots.iter().enumerate() {
        if g.len() != m {
            return Err(ManifoldError::DimensionMismatch {
                what: "nonlinearity snapshot",
                expected: m,
                got: g.len(),
            });
        }
        for (j, &v) in g.iter().enumerate() {
            snapshots.set(j, k, v);
        }
    }
    let ones = vec![1.0; m];
    TrainingDataset::from_parts(basis, snapshots, truth_weights.to_vec(), ones)
}

/// Builds a cell-case dataset.
///
/// `rom_coeffs[n]` are the coefficients of reduced test function `n` in the
/// full basis; `groups[m]` lists the full-basis indices with support on cell
/// `m`; `local_integrals[k]` concatenates, cell by cell, the local integrals
/// of the k-th nonlinearity snapshot against those basis functions. The
/// regularization entries are the cell measures.
pub fn build_cell_dataset(
    rom_coeffs: &[Vec<f64>],
    groups: &[Vec<usize>],
    local_integrals: &[Vec<f64>],
    cell_measures: &[f64],
    truth_weights: &[f64],
    simplified: bool,
) -> Result<TrainingDataset, ManifoldError> {
    if rom_coeffs.is_empty() || local_integrals.is_empty() || groups.is_empty() {
        return Err(ManifoldError::EmptyDataset);
    }
    let m = groups.len();
    if cell_measures.len() != m {
        return Err(ManifoldError::DimensionMismatch {
            what: "cell measures",
            expected: m,
            got: cell_measures.len(),
        });
    }
    if let Some(index) = cell_measures.iter().position(|&d| !(d > 0.0)) {
        return Err(ManifoldError::ZeroCellMeasure { index });
    }
    let group_sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let nodal_dim: usize = group_sizes.iter().sum();
    let coeff_len = rom_coeffs[0].len();
    // Concatenate restricted coefficients cell by cell.
    let mut test_values = vec![Vec::with_capacity(nodal_dim); rom_coeffs.len()];
    for (cell, group) in groups.iter().enumerate() {
        for &node in group {
            if node >= coeff_len {
                return Err(ManifoldError::NodeOutOfRange { cell, node, len: coeff_len });
            }
            for (n, coeffs) in rom_coeffs.iter().enumerate() {
                if coeffs.len() != coeff_len {
                    return Err(ManifoldError::DimensionMismatch {
                        what: "rom coefficients",
                        expected: coeff_len,
                        got: coeffs.len(),
                    });
                }
                test_values[n].push(coeffs[node]);
            }
        }
    }
    let kind = if simplified { CaseKind::CellSimplified } else { CaseKind::CellGeneral };
    let basis = StructuredBasis::new(kind, &group_sizes, test_values)?;
    let mut snapshots = DenseMatrix::zeros(nodal_dim, local_integrals.len());
    for (k, g) in local_integrals.iter().enumerate() {
        if g.len() != nodal_dim {
            return Err(ManifoldError::DimensionMismatch {
                what: "local integrals",
                expected: nodal_dim,
                got: g.len(),
            });
        }
        for (j, &v) in g.iter().enumerate() {
            snapshots.set(j, k, v);
        }
    }
    TrainingDataset::from_parts(basis, snapshots, truth_weights.to_vec(), cell_measures.to_vec())
}

/// Dense solution manifold matrix in snapshot-major row order.
#[derive(Debug, Clone)]
pub struct SolutionManifoldMatrix {
    matrix: DenseMatrix,
    num_summands: usize,
    num_test_functions: usize,
    num_snapshots: usize,
}

impl SolutionManifoldMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    pub fn num_summands(&self) -> usize {
        self.num_summands
    }

    pub fn num_test_functions(&self) -> usize {
        self.num_test_functions
    }

    pub fn num_snapshots(&self) -> usize {
        self.num_snapshots
    }
}

/// Bytes a dense manifold matrix for this dataset would occupy.
pub fn dense_manifold_bytes(ds: &TrainingDataset) -> u64 {
    8 * ds.num_snapshots() as u64 * ds.num_test_functions() as u64 * ds.num_summands() as u64
}

/// Materializes the dense manifold matrix, row `k*n_r + n` holding the vector
/// of summand evaluations for snapshot `k` and test function `n`.
///
/// This is exactly the memory-critical object the compression stage avoids;
/// the explicit budget guard turns an out-of-memory failure into an error.
pub fn assemble_dense(
    ds: &TrainingDataset,
    mem_budget_bytes: u64,
) -> Result<SolutionManifoldMatrix, ManifoldError> {
    let required = dense_manifold_bytes(ds);
    if required > mem_budget_bytes {
        return Err(ManifoldError::MemoryBudgetExceeded { required, budget: mem_budget_bytes });
    }
    let (m, n_r, k) = (ds.num_summands(), ds.num_test_functions(), ds.num_snapshots());
    if k == 0 || n_r == 0 {
        return Err(ManifoldError::EmptyDataset);
    }
    let basis = ds.basis();
    let snaps = ds.snapshots();
    let mut matrix = DenseMatrix::zeros(k * n_r, m);
    for kk in 0..k {
        for n in 0..n_r {
            let row = matrix.row_mut(kk * n_r + n);
            for (mm, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in basis.group_range(mm) {
                    acc += basis.test_value(n, j) * snaps.get(j, kk);
                }
                *slot = acc;
            }
        }
    }
    Ok(SolutionManifoldMatrix { matrix, num_summands: m, num_test_functions: n_r, num_snapshots: k })
}

/// Reorders a test-function-major matrix (row `n*m + mm`, one column per
/// snapshot) into the snapshot-major manifold layout (row `k*n_r + n`, one
/// column per summand): `out[k*n_r + n, mm] = c[n*m + mm, k]`.
pub fn to_snapshot_major(
    c: &DenseMatrix,
    m: usize,
    n_r: usize,
    k: usize,
) -> Result<DenseMatrix, ManifoldError> {
    if c.rows() != n_r * m {
        return Err(ManifoldError::DimensionMismatch { what: "layout rows", expected: n_r * m, got: c.rows() });
    }
    if c.cols() != k {
        return Err(ManifoldError::DimensionMismatch { what: "layout cols", expected: k, got: c.cols() });
    }
    let mut out = DenseMatrix::zeros(k * n_r, m);
    for kk in 0..k {
        for n in 0..n_r {
            for mm in 0..m {
                out.set(kk * n_r + n, mm, c.get(n * m + mm, kk));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`to_snapshot_major`].
pub fn to_testfn_major(
    a: &DenseMatrix,
    m: usize,
    n_r: usize,
    k: usize,
) -> Result<DenseMatrix, ManifoldError> {
    if a.rows() != k * n_r {
        return Err(ManifoldError::DimensionMismatch { what: "layout rows", expected: k * n_r, got: a.rows() });
    }
    if a.cols() != m {
        return Err(ManifoldError::DimensionMismatch { what: "layout cols", expected: m, got: a.cols() });
    }
    let mut out = DenseMatrix::zeros(n_r * m, k);
    for kk in 0..k {
        for n in 0..n_r {
            for mm in 0..m {
                out.set(n * m + mm, kk, a.get(kk * n_r + n, mm));
            }
        }
    }
    Ok(out)
}
