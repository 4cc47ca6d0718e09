//! Structured compression of the training data.
//!
//! The dense manifold matrix is never formed. Its factorized layout is
//! compressed along the snapshot dimension by (i) an analytic, structure-
//! exploiting QR of the test-function factor, (ii) a truncated SVD of the
//! small triangular-factor/snapshot product, and (iii) a permutation back to
//! the snapshot-major layout the training stage consumes. The discarded
//! singular spectrum gives the compression error exactly.

use crate::kernels::{self, DenseMatrix, KernelError, TruncatedSvd};
use crate::manifold::{self, CaseKind, ManifoldError, StructuredBasis, TrainingDataset};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompressionError {
    #[error("operation requires kind {expected:?}, dataset is {got:?}")]
    WrongCaseKind { expected: CaseKind, got: CaseKind },
    #[error("cell group {group} is rank deficient")]
    RankDeficientGroup { group: usize },
    #[error("compression rank {k} outside 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("relative tolerance {0} outside (0, 1)")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Structured QR factor of the test-function factor, restricted to active
/// columns.
///
/// For `Quadrature`/`CellSimplified` the columns of the factor are mutually
/// orthogonal, so the triangular factor is the diagonal of column norms. For
/// `CellGeneral` the columns split into per-cell blocks spanning mutually
/// orthogonal spaces, so the factor is block diagonal with one small
/// triangle per cell. It is never materialized at full size.
#[derive(Debug, Clone)]
pub struct StructuredQr {
    kind: CaseKind,
    /// Nodal column indices that participate (zero columns are skipped).
    active_columns: Vec<usize>,
    factor: QrFactor,
}

#[derive(Debug, Clone)]
enum QrFactor {
    /// Column norms, aligned with `active_columns`.
    Diagonal(Vec<f64>),
    Blocks(Vec<GroupBlock>),
}

#[derive(Debug, Clone)]
struct GroupBlock {
    /// Offset of the block's first column within `active_columns`.
    offset: usize,
    r: DenseMatrix,
    r_inv: DenseMatrix,
}

impl StructuredQr {
    pub fn kind(&self) -> CaseKind {
        self.kind
    }

    pub fn active_columns(&self) -> &[usize] {
        &self.active_columns
    }

    pub fn active_dim(&self) -> usize {
        self.active_columns.len()
    }

    /// Applies the triangular factor to the matching rows of the snapshot
    /// matrix, producing the compact `active_dim x K` product the SVD runs on.
    pub fn apply_to_snapshots(&self, snapshots: &DenseMatrix) -> DenseMatrix {
        let k = snapshots.cols();
        let mut out = DenseMatrix::zeros(self.active_dim(), k);
        match &self.factor {
            QrFactor::Diagonal(norms) => {
                for (i, (&j, &norm)) in self.active_columns.iter().zip(norms).enumerate() {
                    for kk in 0..k {
                        out.set(i, kk, norm * snapshots.get(j, kk));
                    }
                }
            }
            QrFactor::Blocks(blocks) => {
                for block in blocks {
                    let size = block.r.rows();
                    for row in 0..size {
                        for kk in 0..k {
                            let mut acc = 0.0;
                            for col in row..size {
                                let j = self.active_columns[block.offset + col];
                                acc += block.r.get(row, col) * snapshots.get(j, kk);
                            }
                            out.set(block.offset + row, kk, acc);
                        }
                    }
                }
            }
        }
        out
    }

    /// Applies the inverse triangular factor to a compact matrix and scatters
    /// the result to full nodal dimension (zero rows on inactive columns).
    pub fn solve_and_scatter(&self, compact: &DenseMatrix, nodal_dim: usize) -> DenseMatrix {
        let cols = compact.cols();
        let mut out = DenseMatrix::zeros(nodal_dim, cols);
        match &self.factor {
            QrFactor::Diagonal(norms) => {
                for (i, (&j, &norm)) in self.active_columns.iter().zip(norms).enumerate() {
                    for c in 0..cols {
                        out.set(j, c, compact.get(i, c) / norm);
                    }
                }
            }
            QrFactor::Blocks(blocks) => {
                for block in blocks {
                    let size = block.r.rows();
                    for row in 0..size {
                        let j = self.active_columns[block.offset + row];
                        for c in 0..cols {
                            let mut acc = 0.0;
                            for col in 0..size {
                                acc += block.r_inv.get(row, col) * compact.get(block.offset + col, c);
                            }
                            out.set(j, c, acc);
                        }
                    }
                }
            }
        }
        out
    }

    /// Dense materialization of the triangular factor over the active
    /// columns. Diagnostic/oracle use only.
    pub fn dense_r(&self) -> DenseMatrix {
        let d = self.active_dim();
        let mut out = DenseMatrix::zeros(d, d);
        match &self.factor {
            QrFactor::Diagonal(norms) => {
                for (i, &n) in norms.iter().enumerate() {
                    out.set(i, i, n);
                }
            }
            QrFactor::Blocks(blocks) => {
                for block in blocks {
                    let size = block.r.rows();
                    for row in 0..size {
                        for col in 0..size {
                            out.set(block.offset + row, block.offset + col, block.r.get(row, col));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Builds the structured QR of the basis factor analytically.
///
/// `Quadrature`/`CellSimplified`: diagonal with entries equal to the column
/// norms (the orthonormal factor is the column-normalized basis factor).
/// `CellGeneral`: one dense QR per cell block of reduced-coefficient columns;
/// a block whose columns are linearly dependent is reported with its cell id.
/// Zero columns (inactive) are excluded up front.
pub fn structured_qr(basis: &StructuredBasis) -> Result<StructuredQr, CompressionError> {
    let n_r = basis.num_test_functions();
    match basis.kind() {
        CaseKind::Quadrature | CaseKind::CellSimplified => {
            let mut active = Vec::new();
            let mut norms = Vec::new();
            for j in 0..basis.nodal_dim() {
                let mut sq = 0.0;
                for n in 0..n_r {
                    let v = basis.test_value(n, j);
                    sq += v * v;
                }
                if sq > 0.0 {
                    active.push(j);
                    norms.push(sq.sqrt());
                }
            }
            Ok(StructuredQr { kind: basis.kind(), active_columns: active, factor: QrFactor::Diagonal(norms) })
        }
        CaseKind::CellGeneral => {
            let mut active = Vec::new();
            let mut blocks = Vec::new();
            for m in 0..basis.num_summands() {
                if !basis.summand_active(m) {
                    continue;
                }
                let range = basis.group_range(m);
                let size = range.len();
                let slice = DenseMatrix::from_fn(n_r, size, |n, c| basis.test_value(n, range.start + c))?;
                if n_r < size {
                    return Err(CompressionError::RankDeficientGroup { group: m });
                }
                let (_, r) = kernels::qr_dense(&slice).map_err(|e| match e {
                    KernelError::RankDeficient { .. } => CompressionError::RankDeficientGroup { group: m },
                    other => CompressionError::Kernel(other),
                })?;
                let r_inv = kernels::invert_upper_triangular(&r)?;
                blocks.push(GroupBlock { offset: active.len(), r, r_inv });
                active.extend(range);
            }
            Ok(StructuredQr { kind: basis.kind(), active_columns: active, factor: QrFactor::Blocks(blocks) })
        }
    }
}

/// Compressed training data: the thin manifold matrix, the retained low-order
/// factors, and the exact discarded singular spectrum.
#[derive(Debug, Clone)]
pub struct CompressedDataset {
    pub kind: CaseKind,
    /// Thin manifold matrix, `k_thin*n_r x m`, snapshot-major rows.
    pub a_thin: DenseMatrix,
    /// Tail energy of the discarded singular values: the exact Frobenius
    /// distance between the factorized data and its retained surrogate.
    pub compression_error: f64,
    pub k_thin: usize,
    /// Full descending singular spectrum of the compact product.
    pub singular_values: Vec<f64>,
    /// Retained low-order factor in nodal coordinates (`nodal_dim x k_thin`),
    /// zero rows on inactive columns.
    pub retained_factor: DenseMatrix,
    /// Right singular factor (`k_thin x num_snapshots`); identifies the
    /// retained surrogate with a full-size prolongation in oracles.
    pub right_factor: DenseMatrix,
    /// Spectral norm of the group-sum prolongation applied after simplified
    /// compression (`max_m sqrt(|group m|)`); 1 for the other kinds. The
    /// product with `compression_error` bounds the manifold-level error.
    pub prolongation_norm_bound: f64,
    /// Retained and first discarded singular values coincide (non-unique
    /// truncation, resolved by natural order).
    pub degenerate_truncation: bool,
    // Source-dataset data the training and bound stages consume.
    pub truth_weights: Vec<f64>,
    pub regularization: Vec<f64>,
    pub num_summands: usize,
    pub num_snapshots: usize,
    pub num_test_functions: usize,
    pub active_summands: Vec<bool>,
}

impl CompressedDataset {
    /// Compression error at manifold level: exact for `Quadrature` and
    /// `CellGeneral`, the guaranteed upper bound through the group-sum
    /// prolongation for `CellSimplified`.
    pub fn effective_compression_error(&self) -> f64 {
        self.prolongation_norm_bound * self.compression_error
    }

    pub fn equations(&self) -> usize {
        self.k_thin * self.num_test_functions
    }
}

/// Largest admissible compression rank: the compact product has one row per
/// active nodal column and one column per snapshot.
pub fn max_rank(ds: &TrainingDataset) -> Result<usize, CompressionError> {
    let qr = structured_qr(ds.basis())?;
    Ok(qr.active_dim().min(ds.num_snapshots()))
}

/// Compresses the dataset to rank `k_thin`.
///
/// Runs the structured QR, the truncated SVD of the compact product, forms
/// the retained factor with the inverse triangular factor, expands it through
/// the basis structure, and permutes into the snapshot-major layout. Never
/// materializes the dense manifold matrix.
pub fn compress(ds: &TrainingDataset, k_thin: usize) -> Result<CompressedDataset, CompressionError> {
    let qr = structured_qr(ds.basis())?;
    compress_with_qr(ds, &qr, RankChoice::Fixed(k_thin))
}

/// Compresses to the smallest rank whose relative tail energy is below
/// `rel_tol`, reusing a single SVD for selection and construction.
pub fn compress_to_tolerance(
    ds: &TrainingDataset,
    rel_tol: f64,
) -> Result<CompressedDataset, CompressionError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(CompressionError::InvalidTolerance(rel_tol));
    }
    let qr = structured_qr(ds.basis())?;
    compress_with_qr(ds, &qr, RankChoice::Tolerance(rel_tol))
}

enum RankChoice {
    Fixed(usize),
    Tolerance(f64),
}

fn compress_with_qr(
    ds: &TrainingDataset,
    qr: &StructuredQr,
    choice: RankChoice,
) -> Result<CompressedDataset, CompressionError> {
    let max = qr.active_dim().min(ds.num_snapshots());
    if max == 0 {
        return Err(CompressionError::RankOutOfRange { k: 0, max: 0 });
    }
    let compact = qr.apply_to_snapshots(ds.snapshots());
    // The SVD backend computes the full spectrum either way; request it all
    // and slice, so tolerance- and fixed-rank paths share one factorization.
    let svd = kernels::truncated_svd(&compact, max)?;
    let k_thin = match choice {
        RankChoice::Fixed(k) => {
            if k < 1 || k > max {
                return Err(CompressionError::RankOutOfRange { k, max });
            }
            k
        }
        RankChoice::Tolerance(tol) => smallest_rank_for(&svd, tol),
    };
    build_compressed(ds, qr, &svd, k_thin)
}

fn smallest_rank_for(svd: &TruncatedSvd, rel_tol: f64) -> usize {
    let total = svd.total_energy();
    if total == 0.0 {
        return 1;
    }
    let bound = rel_tol * total;
    for k in 1..svd.singular_values.len() {
        if svd.tail_energy(k) <= bound {
            return k;
        }
    }
    svd.singular_values.len()
}

fn build_compressed(
    ds: &TrainingDataset,
    qr: &StructuredQr,
    svd: &TruncatedSvd,
    k_thin: usize,
) -> Result<CompressedDataset, CompressionError> {
    let basis = ds.basis();
    let (m, n_r) = (ds.num_summands(), ds.num_test_functions());
    // Retained factor scaled by the kept singular values, then pulled back
    // through the triangular factor: retained_factor = R^{-1} U1 Sigma1.
    let mut scaled = DenseMatrix::zeros(qr.active_dim(), k_thin);
    for i in 0..qr.active_dim() {
        for j in 0..k_thin {
            scaled.set(i, j, svd.left.get(i, j) * svd.singular_values[j]);
        }
    }
    let retained_factor = qr.solve_and_scatter(&scaled, basis.nodal_dim());

    // Expand through the basis structure in the test-function-major layout;
    // for the simplified kind this also applies the group sums.
    let mut c_thin = DenseMatrix::zeros(n_r * m, k_thin);
    for n in 0..n_r {
        for mm in 0..m {
            let row = n * m + mm;
            for j in basis.group_range(mm) {
                let v = basis.test_value(n, j);
                if v == 0.0 {
                    continue;
                }
                for kk in 0..k_thin {
                    let acc = c_thin.get(row, kk) + v * retained_factor.get(j, kk);
                    c_thin.set(row, kk, acc);
                }
            }
        }
    }
    let a_thin = manifold::to_snapshot_major(&c_thin, m, n_r, k_thin)?;

    let right_factor = DenseMatrix::from_fn(k_thin, ds.num_snapshots(), |i, j| svd.right.get(i, j))?;
    let degenerate = k_thin < svd.singular_values.len()
        && (svd.singular_values[k_thin - 1] - svd.singular_values[k_thin]).abs()
            <= kernels::DEGENERACY_TOL * svd.singular_values[0].max(f64::MIN_POSITIVE);

    let prolongation_norm_bound = if basis.kind() == CaseKind::CellSimplified {
        simplified_bound_factor(basis)?
    } else {
        1.0
    };

    Ok(CompressedDataset {
        kind: basis.kind(),
        a_thin,
        compression_error: svd.tail_energy(k_thin),
        k_thin,
        singular_values: svd.singular_values.clone(),
        retained_factor,
        right_factor,
        prolongation_norm_bound,
        degenerate_truncation: degenerate,
        truth_weights: ds.truth_weights().to_vec(),
        regularization: ds.regularization().to_vec(),
        num_summands: m,
        num_snapshots: ds.num_snapshots(),
        num_test_functions: n_r,
        active_summands: basis.active_summands().to_vec(),
    })
}

/// Smallest rank whose tail energy is below `rel_tol` times the total energy.
pub fn choose_rank(ds: &TrainingDataset, rel_tol: f64) -> Result<usize, CompressionError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(CompressionError::InvalidTolerance(rel_tol));
    }
    let qr = structured_qr(ds.basis())?;
    let max = qr.active_dim().min(ds.num_snapshots());
    if max == 0 {
        return Err(CompressionError::RankOutOfRange { k: 0, max: 0 });
    }
    let compact = qr.apply_to_snapshots(ds.snapshots());
    let svd = kernels::truncated_svd(&compact, max)?;
    Ok(smallest_rank_for(&svd, rel_tol))
}

/// Spectral norm of the group-sum prolongation of the simplified compression:
/// `max_m sqrt(|group m|)`.
pub fn simplified_bound_factor(basis: &StructuredBasis) -> Result<f64, CompressionError> {
    if basis.kind() != CaseKind::CellSimplified {
        return Err(CompressionError::WrongCaseKind {
            expected: CaseKind::CellSimplified,
            got: basis.kind(),
        });
    }
    let max_group = (0..basis.num_summands()).map(|m| basis.group_size(m)).max().unwrap_or(1);
    Ok((max_group as f64).sqrt())
}
