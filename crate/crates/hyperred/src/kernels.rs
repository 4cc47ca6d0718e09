//! Dense linear-algebra and constrained least-squares primitives.
//!
//! Everything in here is a pure function of its inputs with fixed sign and
//! tie-breaking conventions, so results are bit-stable across runs and safe
//! to share between threads.

use nalgebra::DMatrix;
use thiserror::Error;

/// Relative threshold below which a triangular diagonal entry counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Relative gap under which a singular-value truncation is flagged degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("data length {len} does not match a {rows}x{cols} matrix")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("truncation rank {k} outside 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("rank deficient: |R[{index},{index}]| = {value:.3e} below tolerance {tol:.3e}")]
    RankDeficient { index: usize, value: f64, tol: f64 },
    #[error("support index {index} out of range for {cols} columns")]
    SupportOutOfRange { index: usize, cols: usize },
    #[error("active-set solve stalled after {0} iterations")]
    NnlsStalled(usize),
}

/// Row-major dense matrix of finite `f64` entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting shape mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if data.len() != rows * cols {
            return Err(KernelError::ShapeMismatch { rows, cols, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite {
                row: pos.checked_div(cols).unwrap_or(0),
                col: pos.checked_rem(cols).unwrap_or(0),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, KernelError> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(KernelError::ShapeMismatch { rows: n_rows, cols: n_cols, len: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    /// Appends a row in place.
    pub fn push_row(&mut self, row: &[f64]) -> Result<(), KernelError> {
        if row.len() != self.cols {
            return Err(KernelError::ShapeMismatch { rows: self.rows + 1, cols: self.cols, len: row.len() });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`, straightforward dense product.
    pub fn matmul(&self, other: &Self) -> Result<Self, KernelError> {
        if self.cols != other.rows {
            return Err(KernelError::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b_kj;
                }
            }
        }
        Ok(out)
    }

    /// `self * x` for a vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, KernelError> {
        if x.len() != self.cols {
            return Err(KernelError::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self^T * x`, streamed over rows so the access pattern stays contiguous.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>, KernelError> {
        if x.len() != self.rows {
            return Err(KernelError::DimensionMismatch { expected: self.rows, got: x.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self, KernelError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(KernelError::DimensionMismatch { expected: self.rows * self.cols, got: other.rows * other.cols });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self, KernelError> {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Truncated singular value decomposition.
///
/// `left` holds the first `k` left singular vectors, `right` the first `k`
/// right singular vectors as rows, while `singular_values` always carries the
/// full descending spectrum so tail energies are exact rather than estimated.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub left: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right: DenseMatrix,
    pub k: usize,
    /// Set when the retained and first discarded singular values coincide to
    /// `DEGENERACY_TOL` relative, i.e. the best rank-k approximation is not
    /// unique; the factors are still valid under the natural-order tie-break.
    pub degenerate: bool,
}

impl TruncatedSvd {
    /// Energy of the singular values discarded when keeping `k` of them:
    /// sqrt(sum_{i>k} sigma_i^2). Summed smallest-first for accuracy.
    pub fn tail_energy(&self, k: usize) -> f64 {
        let mut sum = 0.0;
        for &s in self.singular_values.iter().skip(k).rev() {
            sum += s * s;
        }
        sum.sqrt()
    }

    /// Frobenius norm of the full spectrum.
    pub fn total_energy(&self) -> f64 {
        self.tail_energy(0)
    }

    /// Dense rank-k reconstruction, for diagnostics and oracles.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.left.clone();
        for i in 0..scaled.rows() {
            for j in 0..self.k {
                let v = scaled.get(i, j) * self.singular_values[j];
                scaled.set(i, j, v);
            }
        }
        scaled.matmul(&self.right).expect("dims fixed by construction")
    }
}

/// Entries whose magnitude stays below this count as zero when locating the
/// first nonzero entry of a unit-norm singular vector.
const SIGN_TOL: f64 = 1e-12;

/// Computes the truncated SVD of `a`, keeping `k` singular triplets and the
/// full singular spectrum.
///
/// Singular values are sorted descending (stable under ties) and the sign of
/// each retained left vector is fixed so its first nonzero entry is positive.
/// Large strongly-rectangular inputs are reduced by a QR factorization first;
/// both paths are exact.
pub fn truncated_svd(a: &DenseMatrix, k: usize) -> Result<TruncatedSvd, KernelError> {
    let (m, n) = (a.rows(), a.cols());
    let p = m.min(n);
    if k < 1 || k > p {
        return Err(KernelError::RankOutOfRange { k, max: p });
    }

    let mat = a.to_nalgebra();
    // Tall-and-skinny inputs: SVD of the square triangular QR factor, then
    // compose the left factor. Cuts the Golub-Kahan cost roughly in half at
    // the benchmark scale without changing the result.
    let two_stage = m >= 2 * n && m * n > 2_000_000;
    let (u, mut sv, v_t) = if two_stage {
        let qr = mat.qr();
        let (q, r) = (qr.q(), qr.r());
        let svd = r.svd(true, true);
        let u_r = svd.u.expect("left factor requested");
        (q * u_r, svd.singular_values.as_slice().to_vec(), svd.v_t.expect("right factor requested"))
    } else {
        let svd = mat.svd(true, true);
        (
            svd.u.expect("left factor requested"),
            svd.singular_values.as_slice().to_vec(),
            svd.v_t.expect("right factor requested"),
        )
    };

    // Stable descending sort; equal values keep their natural order.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).expect("singular values are finite"));
    let sorted: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    sv = sorted;

    let mut left = DenseMatrix::from_fn(m, k, |i, j| u[(i, order[j])])?;
    let mut right = DenseMatrix::from_fn(k, n, |i, j| v_t[(order[i], j)])?;

    for j in 0..k {
        let lead = (0..m).map(|i| left.get(i, j)).find(|v| v.abs() > SIGN_TOL);
        if let Some(v) = lead {
            if v < 0.0 {
                for i in 0..m {
                    let x = -left.get(i, j);
                    left.set(i, j, x);
                }
                for i in 0..n {
                    let x = -right.get(j, i);
                    right.set(j, i, x);
                }
            }
        }
    }

    let degenerate =
        k < sv.len() && (sv[k - 1] - sv[k]).abs() <= DEGENERACY_TOL * sv[0].max(f64::MIN_POSITIVE);

    Ok(TruncatedSvd { left, singular_values: sv, right, k, degenerate })
}

/// Thin QR factorization `a = q * r` with `q^T q = I` and `r` upper triangular
/// with strictly positive diagonal.
pub fn qr_dense(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), KernelError> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(KernelError::ShapeMismatch { rows: m, cols: n, len: a.data().len() });
    }
    let a_norm = a.frobenius_norm();
    let qr = a.to_nalgebra().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let tol = RANK_TOL * a_norm;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for col in 0..n {
                r[(j, col)] = -r[(j, col)];
            }
            for row in 0..m {
                q[(row, j)] = -q[(row, j)];
            }
        }
        if r[(j, j)] <= tol {
            return Err(KernelError::RankDeficient { index: j, value: r[(j, j)], tol });
        }
    }
    Ok((DenseMatrix::from_nalgebra(&q)?, DenseMatrix::from_nalgebra(&r)?))
}

/// Inverts an upper-triangular matrix by back substitution.
pub fn invert_upper_triangular(r: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    let n = r.rows();
    if r.cols() != n {
        return Err(KernelError::DimensionMismatch { expected: n, got: r.cols() });
    }
    let mut inv = DenseMatrix::zeros(n, n);
    for col in 0..n {
        let mut x = vec![0.0; n];
        x[col] = 1.0;
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= r.get(i, j) * x[j];
            }
            let d = r.get(i, i);
            if d == 0.0 {
                return Err(KernelError::RankDeficient { index: i, value: d, tol: 0.0 });
            }
            x[i] = s / d;
        }
        for i in 0..n {
            inv.set(i, col, x[i]);
        }
    }
    Ok(inv)
}

/// Solves `min ||A w - g||` subject to `w_i >= 0` for `i` in `support` and
/// `w_j = 0` otherwise, by a Lawson-Hanson active-set iteration restricted to
/// the given support. Returns the full-length weight vector and `||A w - g||`.
///
/// An empty support returns `w = 0` with residual `||g||`.
pub fn nnls_fixed_support(
    a: &DenseMatrix,
    g: &[f64],
    support: &[usize],
) -> Result<(Vec<f64>, f64), KernelError> {
    if g.len() != a.rows() {
        return Err(KernelError::DimensionMismatch { expected: a.rows(), got: g.len() });
    }
    let mut idx: Vec<usize> = support.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if let Some(&bad) = idx.iter().find(|&&j| j >= a.cols()) {
        return Err(KernelError::SupportOutOfRange { index: bad, cols: a.cols() });
    }
    let mut w = vec![0.0; a.cols()];
    if idx.is_empty() {
        return Ok((w, norm2(g)));
    }
    let rows = a.rows();
    let mut cols = vec![0.0; rows * idx.len()];
    for (s, &j) in idx.iter().enumerate() {
        for i in 0..rows {
            cols[s * rows + i] = a.get(i, j);
        }
    }
    let sol = nnls_on_gathered_columns(&cols, rows, idx.len(), g)?;
    for (s, &j) in idx.iter().enumerate() {
        w[j] = sol.weights[s];
    }
    Ok((w, sol.residual_norm))
}

pub(crate) struct NnlsSolution {
    /// Weights in gathered-column order.
    pub weights: Vec<f64>,
    /// `g - A w`.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
}

/// Lawson-Hanson on pre-gathered column-major data. Shared by
/// `nnls_fixed_support` and the greedy training loop so both terminate on the
/// same KKT conditions.
pub(crate) fn nnls_on_gathered_columns(
    cols: &[f64],
    rows: usize,
    s: usize,
    g: &[f64],
) -> Result<NnlsSolution, KernelError> {
    debug_assert_eq!(cols.len(), rows * s);
    let col = |j: usize| -> &[f64] { &cols[j * rows..(j + 1) * rows] };
    let g_norm = norm2(g);
    let cols_norm = norm2(cols);
    // Dual feasibility threshold for w_j = 0: a_j^T r <= tol.
    let tol = 1e-12 * cols_norm * g_norm.max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE;

    let mut w = vec![0.0; s];
    let mut passive = vec![false; s];
    let mut residual: Vec<f64> = g.to_vec();
    let max_outer = 3 * s + 30;

    for _ in 0..max_outer {
        // Pick the zero-set column with the largest dual a_j^T r, ties to the
        // lowest index via strict comparison.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..s {
            if passive[j] {
                continue;
            }
            let d = dot(col(j), &residual);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((j, d));
            }
        }
        let (j_new, dual) = match best {
            Some(b) => b,
            None => break,
        };
        if dual <= tol {
            break;
        }
        passive[j_new] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            if inner > max_outer {
                return Err(KernelError::NnlsStalled(max_outer));
            }
            let p_idx: Vec<usize> = (0..s).filter(|&j| passive[j]).collect();
            let z = ls_solve_columns(cols, rows, &p_idx, g);
            if z.iter().all(|&v| v > 0.0) {
                for (offset, &j) in p_idx.iter().enumerate() {
                    w[j] = z[offset];
                }
                break;
            }
            // Step toward z until the first passive weight hits zero.
            let mut alpha = f64::INFINITY;
            let mut blocker = None;
            for (offset, &j) in p_idx.iter().enumerate() {
                if z[offset] <= 0.0 {
                    let t = w[j] / (w[j] - z[offset]);
                    if t < alpha {
                        alpha = t;
                        blocker = Some(j);
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (offset, &j) in p_idx.iter().enumerate() {
                w[j] += alpha * (z[offset] - w[j]);
            }
            if let Some(b) = blocker {
                w[b] = 0.0;
                passive[b] = false;
            }
            for &j in &p_idx {
                if passive[j] && w[j] <= 0.0 {
                    w[j] = 0.0;
                    passive[j] = false;
                }
            }
        }

        residual = g.to_vec();
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                for (r, &c) in residual.iter_mut().zip(col(j)) {
                    *r -= wj * c;
                }
            }
        }
    }

    let residual_norm = norm2(&residual);
    Ok(NnlsSolution { weights: w, residual, residual_norm })
}

/// Unconstrained least squares on a subset of gathered columns, via QR.
fn ls_solve_columns(cols: &[f64], rows: usize, subset: &[usize], g: &[f64]) -> Vec<f64> {
    let p = subset.len();
    if p == 0 {
        return Vec::new();
    }
    let mut a = DMatrix::<f64>::zeros(rows, p);
    for (c, &j) in subset.iter().enumerate() {
        for i in 0..rows {
            a[(i, c)] = cols[j * rows + i];
        }
    }
    let qr = a.qr();
    let mut rhs = nalgebra::DVector::from_column_slice(g);
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    // Back substitution on the leading p x p triangle.
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..p {
            s -= r[(i, j)] * x[j];
        }
        let d = r[(i, i)];
        x[i] = if d.abs() > 0.0 { s / d } else { 0.0 };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, KernelError::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn svd_diagonal_matrix() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let svd = truncated_svd(&a, 1).unwrap();
        assert_relative_eq!(svd.singular_values[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(svd.singular_values[1], 1.0, max_relative = 1e-14);
        assert_relative_eq!(svd.tail_energy(1), 1.0, max_relative = 1e-14);
        assert!(!svd.degenerate);
    }

    #[test]
    fn svd_full_rank_truncation_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 5, 3);
        let svd = truncated_svd(&a, 3).unwrap();
        assert!(svd.tail_energy(3) == 0.0);
        let diff = a.sub(&svd.reconstruct()).unwrap();
        assert!(diff.frobenius_norm() <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn svd_tail_matches_reconstruction_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 6, 4);
        let svd = truncated_svd(&a, 2).unwrap();
        let err = a.sub(&svd.reconstruct()).unwrap().frobenius_norm();
        assert_relative_eq!(err, svd.tail_energy(2), max_relative = 1e-10);
    }

    #[test]
    fn svd_factors_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 8, 5);
        let svd = truncated_svd(&a, 4).unwrap();
        let ltl = svd.left.transpose().matmul(&svd.left).unwrap();
        let rtr = svd.right.matmul(&svd.right.transpose()).unwrap();
        let id = DenseMatrix::identity(4);
        assert!(ltl.sub(&id).unwrap().frobenius_norm() <= 1e-10);
        assert!(rtr.sub(&id).unwrap().frobenius_norm() <= 1e-10);
    }

    #[test]
    fn svd_sign_convention_fixes_leading_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 6, 3);
        let svd = truncated_svd(&a, 3).unwrap();
        for j in 0..3 {
            let lead = (0..6).map(|i| svd.left.get(i, j)).find(|v| v.abs() > 1e-12).unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn svd_degenerate_truncation_is_flagged() {
        let a = DenseMatrix::identity(3);
        let svd = truncated_svd(&a, 1).unwrap();
        assert!(svd.degenerate);
        assert_eq!(svd.singular_values.len(), 3);
    }

    #[test]
    fn svd_two_stage_path_matches_direct() {
        // Force the two-stage path with a tall matrix above the size gate.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tall = random_matrix(&mut rng, 4100, 500);
        let svd = truncated_svd(&tall, 3).unwrap();
        let ltl = svd.left.transpose().matmul(&svd.left).unwrap();
        assert!(ltl.sub(&DenseMatrix::identity(3)).unwrap().frobenius_norm() <= 1e-10);
        // Exact identities: full spectrum carries the Frobenius norm, and the
        // rank-3 reconstruction error equals the discarded tail energy.
        assert_relative_eq!(svd.total_energy(), tall.frobenius_norm(), max_relative = 1e-12);
        let err = tall.sub(&svd.reconstruct()).unwrap().frobenius_norm();
        assert_relative_eq!(err, svd.tail_energy(3), max_relative = 1e-10);
    }

    #[test]
    fn svd_rank_out_of_range() {
        let a = DenseMatrix::identity(3);
        assert!(matches!(truncated_svd(&a, 0), Err(KernelError::RankOutOfRange { k: 0, max: 3 })));
        assert!(matches!(truncated_svd(&a, 4), Err(KernelError::RankOutOfRange { k: 4, max: 3 })));
    }

    #[test]
    fn qr_rejects_wide_matrices() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(qr_dense(&a), Err(KernelError::ShapeMismatch { .. })));
    }

    #[test]
    fn nnls_rejects_bad_support_and_rhs() {
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            nnls_fixed_support(&a, &[1.0, 1.0], &[0, 5]),
            Err(KernelError::SupportOutOfRange { index: 5, cols: 2 })
        ));
        assert!(matches!(
            nnls_fixed_support(&a, &[1.0], &[0]),
            Err(KernelError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn qr_identity() {
        let a = DenseMatrix::identity(3);
        let (q, r) = qr_dense(&a).unwrap();
        assert!(q.sub(&a).unwrap().frobenius_norm() <= 1e-14);
        assert!(r.sub(&a).unwrap().frobenius_norm() <= 1e-14);
    }

    #[test]
    fn qr_single_column_normalizes() {
        let a = DenseMatrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let (q, r) = qr_dense(&a).unwrap();
        assert_relative_eq!(q.get(0, 0), 0.6, max_relative = 1e-14);
        assert_relative_eq!(q.get(1, 0), 0.8, max_relative = 1e-14);
        assert_relative_eq!(r.get(0, 0), 5.0, max_relative = 1e-14);
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 8, 3);
        let (q, r) = qr_dense(&a).unwrap();
        let diff = a.sub(&q.matmul(&r).unwrap()).unwrap();
        assert!(diff.frobenius_norm() <= 1e-12 * a.frobenius_norm());
        let qtq = q.transpose().matmul(&q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(3)).unwrap().frobenius_norm() <= 1e-12 * 3.0);
        for j in 0..3 {
            assert!(r.get(j, j) > 0.0);
        }
    }

    #[test]
    fn qr_detects_rank_deficiency() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(matches!(qr_dense(&a), Err(KernelError::RankDeficient { .. })));
    }

    #[test]
    fn invert_upper_triangular_matches() {
        let r = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 4.0]]).unwrap();
        let inv = invert_upper_triangular(&r).unwrap();
        let prod = r.matmul(&inv).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(2)).unwrap().frobenius_norm() <= 1e-14);
    }

    #[test]
    fn nnls_clips_negative_component() {
        let a = DenseMatrix::identity(2);
        let (w, res) = nnls_fixed_support(&a, &[1.0, -1.0], &[0, 1]).unwrap();
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
        assert_eq!(w[1], 0.0);
        assert_relative_eq!(res, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn nnls_exact_fit_when_feasible() {
        let a = DenseMatrix::identity(2);
        let (w, res) = nnls_fixed_support(&a, &[1.0, 1.0], &[0, 1]).unwrap();
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(w[1], 1.0, max_relative = 1e-12);
        assert!(res <= 1e-12);
    }

    #[test]
    fn nnls_empty_support_convention() {
        let a = DenseMatrix::identity(2);
        let (w, res) = nnls_fixed_support(&a, &[3.0, 4.0], &[]).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
        assert_relative_eq!(res, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn nnls_restricts_to_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 6, 4);
        let g: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (w, _) = nnls_fixed_support(&a, &g, &[1, 3]).unwrap();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[2], 0.0);
        assert!(w[1] >= 0.0 && w[3] >= 0.0);
    }

    fn kkt_holds(a: &DenseMatrix, g: &[f64], support: &[usize], w: &[f64]) -> bool {
        let aw = a.matvec(w).unwrap();
        let r: Vec<f64> = aw.iter().zip(g).map(|(x, y)| x - y).collect();
        let grad = a.tr_matvec(&r).unwrap(); // gradient of F/2
        let scale = 1.0 + a.frobenius_norm() * norm2(g);
        support.iter().all(|&j| {
            if w[j] > 0.0 {
                grad[j].abs() <= 1e-10 * scale
            } else {
                grad[j] >= -1e-10 * scale
            }
        })
    }

    #[test]
    fn nnls_kkt_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let rows = rng.gen_range(2..10);
            let cols = rng.gen_range(1..8);
            let a = random_matrix(&mut rng, rows, cols);
            let g: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let support: Vec<usize> = (0..cols).filter(|_| rng.gen_bool(0.7)).collect();
            let (w, res) = nnls_fixed_support(&a, &g, &support).unwrap();
            assert!(res <= norm2(&g) + 1e-12);
            assert!(kkt_holds(&a, &g, &support, &w));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn svd_tail_non_increasing(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(2..9);
            let cols = rng.gen_range(2..9);
            let a = random_matrix(&mut rng, rows, cols);
            let p = rows.min(cols);
            let svd = truncated_svd(&a, p).unwrap();
            for k in 1..=p {
                prop_assert!(svd.tail_energy(k) <= svd.tail_energy(k - 1) + 1e-14);
            }
            prop_assert!(svd.tail_energy(p) == 0.0);
        }

        #[test]
        fn nnls_monotone_in_support(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(2..10);
            let cols = rng.gen_range(2..8);
            let a = random_matrix(&mut rng, rows, cols);
            let g: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut support: Vec<usize> = (0..cols).collect();
            for _ in 0..cols.saturating_sub(1) {
                let (_, r_full) = nnls_fixed_support(&a, &g, &support).unwrap();
                let dropped = support.pop().unwrap();
                let (_, r_small) = nnls_fixed_support(&a, &g, &support).unwrap();
                prop_assert!(r_full <= r_small + 1e-10, "dropping {} improved residual", dropped);
            }
        }
    }
}
