//! Sparse-rule training: the stacked least-squares problem (manifold rows
//! over the regularization row) and its greedy solution by orthogonal
//! matching pursuit with support-restricted non-negative least squares.

use crate::compression::CompressedDataset;
use crate::kernels::{self, norm2, DenseMatrix, KernelError};
use crate::manifold::{self, ManifoldError, SolutionManifoldMatrix, TrainingDataset};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("dimension mismatch building {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("cardinality {m_c} outside 1..={max} selectable columns")]
    InvalidCardinality { m_c: usize, max: usize },
    #[error("stop tolerance must be non-negative, got {0}")]
    NegativeStopTol(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Training problem in standard least-squares form: the data rows stacked
/// over the regularization row, with the right-hand side generated by the
/// truth weights so the truth weights have zero cost by construction.
#[derive(Debug, Clone)]
pub struct LsProblem {
    a_cal: DenseMatrix,
    g: Vec<f64>,
    num_summands: usize,
    active_columns: Vec<usize>,
    w_truth: Vec<f64>,
}

impl LsProblem {
    /// Stacked operator, one row per equation plus the final regularization row.
    pub fn operator(&self) -> &DenseMatrix {
        &self.a_cal
    }

    /// Right-hand side: the stacked operator applied to the truth weights.
    pub fn rhs(&self) -> &[f64] {
        &self.g
    }

    pub fn num_summands(&self) -> usize {
        self.num_summands
    }

    pub fn active_columns(&self) -> &[usize] {
        &self.active_columns
    }

    pub fn truth_weights(&self) -> &[f64] {
        &self.w_truth
    }

    /// sqrt(F(w)) for the stacked cost.
    pub fn cost(&self, w: &[f64]) -> Result<f64, TrainingError> {
        let aw = self.a_cal.matvec(w)?;
        Ok(norm2(&aw.iter().zip(&self.g).map(|(a, b)| a - b).collect::<Vec<f64>>()))
    }

    fn from_rows(
        mut a_rows: DenseMatrix,
        regularization: &[f64],
        truth_weights: &[f64],
        active_columns: Vec<usize>,
    ) -> Result<Self, TrainingError> {
        if regularization.len() != a_rows.cols() {
            return Err(TrainingError::DimensionMismatch {
                what: "regularization row",
                expected: a_rows.cols(),
                got: regularization.len(),
            });
        }
        if truth_weights.len() != a_rows.cols() {
            return Err(TrainingError::DimensionMismatch {
                what: "truth weights",
                expected: a_rows.cols(),
                got: truth_weights.len(),
            });
        }
        a_rows.push_row(regularization)?;
        let g = a_rows.matvec(truth_weights)?;
        Ok(Self {
            num_summands: a_rows.cols(),
            a_cal: a_rows,
            g,
            active_columns,
            w_truth: truth_weights.to_vec(),
        })
    }
}

/// Builds the standard (uncompressed) training problem from the dense
/// manifold matrix. Consumes the matrix; only the regularization row is added.
pub fn build_ls_standard(
    manifold_matrix: SolutionManifoldMatrix,
    ds: &TrainingDataset,
) -> Result<LsProblem, TrainingError> {
    if manifold_matrix.num_summands() != ds.num_summands()
        || manifold_matrix.num_snapshots() != ds.num_snapshots()
        || manifold_matrix.num_test_functions() != ds.num_test_functions()
    {
        return Err(TrainingError::DimensionMismatch {
            what: "manifold matrix",
            expected: ds.num_summands(),
            got: manifold_matrix.num_summands(),
        });
    }
    LsProblem::from_rows(
        manifold_matrix.into_matrix(),
        ds.regularization(),
        ds.truth_weights(),
        ds.active_columns(),
    )
}

/// Builds the compressed training problem: thin manifold rows over the same
/// (uncompressed) regularization row. The right-hand side is generated from
/// the compressed operator, keeping the truth weights at exactly zero cost.
pub fn build_ls_compressed(cds: &CompressedDataset) -> Result<LsProblem, TrainingError> {
    let active = (0..cds.num_summands).filter(|&m| cds.active_summands[m]).collect();
    LsProblem::from_rows(cds.a_thin.clone(), &cds.regularization, &cds.truth_weights, active)
}

/// Why a training run returned before exhausting its cardinality budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyStop {
    /// No remaining candidate had a meaningfully negative gradient component.
    NoDescentCandidate,
    /// The residual dropped below `stop_tol * ||g||`.
    ToleranceReached,
}

/// A trained sparse rule: selected summands in selection order, their
/// non-negative weights, and the residual after every greedy iteration.
#[derive(Debug, Clone)]
pub struct SparseRule {
    pub indices: Vec<usize>,
    /// Full-length weight vector, zero off the selected support.
    pub weights: Vec<f64>,
    /// sqrt(F) after each completed iteration; non-increasing.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub early_stop: Option<EarlyStop>,
    pub num_summands: usize,
}

impl SparseRule {
    pub fn support_size(&self) -> usize {
        self.indices.len()
    }

    /// The truth rule: every summand selected with its truth weight.
    pub fn truth_rule(ds: &TrainingDataset) -> Self {
        let weights = ds.truth_weights().to_vec();
        SparseRule {
            indices: (0..weights.len()).collect(),
            num_summands: weights.len(),
            weights,
            residual_history: vec![0.0],
            final_residual: 0.0,
            early_stop: None,
        }
    }
}

/// Gradient threshold proxy: a candidate only counts as descending when its
/// gradient component is below `-1e-12 * ||operator||_F * ||g||`.
const DESCENT_GUARD: f64 = 1e-12;

/// Orthogonal matching pursuit: grows the support one summand at a time by
/// steepest negative gradient of the stacked cost (ties to the lowest index),
/// re-solving the support-restricted non-negative least squares after every
/// selection.
///
/// Stops early when the residual falls below `stop_tol * ||g||` (`stop_tol =
/// 0` runs the full budget) or when no candidate descends; both outcomes are
/// recorded on the returned rule rather than reported as failures.
pub fn omp_train(p: &LsProblem, m_c: usize, stop_tol: f64) -> Result<SparseRule, TrainingError> {
    let mut rules = omp_train_path(p, &[m_c], stop_tol)?;
    Ok(rules.pop().expect("one checkpoint requested"))
}

/// Runs one greedy pass and snapshots the rule at each requested support size
/// (ascending). All returned rules lie on the same selection path, so this is
/// the cheap way to sweep cardinalities.
pub fn omp_train_path(
    p: &LsProblem,
    checkpoints: &[usize],
    stop_tol: f64,
) -> Result<Vec<SparseRule>, TrainingError> {
    if stop_tol < 0.0 {
        return Err(TrainingError::NegativeStopTol(stop_tol));
    }
    let max_mc = *checkpoints.iter().max().unwrap_or(&0);
    let selectable = p.active_columns.len();
    if max_mc < 1 || max_mc > selectable {
        return Err(TrainingError::InvalidCardinality { m_c: max_mc, max: selectable });
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TrainingError::DimensionMismatch {
            what: "checkpoints (must be strictly ascending)",
            expected: 0,
            got: checkpoints.len(),
        });
    }

    let a = &p.a_cal;
    let rows = a.rows();
    let m = p.num_summands;
    let g = &p.g;
    let g_norm = norm2(g);
    let guard = DESCENT_GUARD * a.frobenius_norm() * g_norm;

    let mut in_support = vec![false; m];
    let mut candidate = vec![false; m];
    for &j in &p.active_columns {
        candidate[j] = true;
    }

    let mut selected: Vec<usize> = Vec::new();
    let mut gathered: Vec<f64> = Vec::new(); // column-major support columns
    let mut weights_on_support: Vec<f64> = Vec::new();
    // Residual A w - g; starts at -g since w = 0.
    let mut residual: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut early_stop = None;

    let mut rules = Vec::with_capacity(checkpoints.len());
    let snapshot = |selected: &[usize],
                    weights_on_support: &[f64],
                    history: &[f64],
                    early_stop: Option<EarlyStop>| {
        let mut weights = vec![0.0; m];
        for (&j, &w) in selected.iter().zip(weights_on_support) {
            weights[j] = w;
        }
        SparseRule {
            indices: selected.to_vec(),
            weights,
            residual_history: history.to_vec(),
            final_residual: history.last().copied().unwrap_or(g_norm),
            early_stop,
            num_summands: m,
        }
    };

    let mut next_checkpoint = 0;
    for iter in 1..=max_mc {
        // Steepest-descent candidate: the gradient of F is 2 A^T (A w - g);
        // pick the most negative component, ties to the lowest index.
        let grad = a.tr_matvec(&residual)?;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !candidate[j] || in_support[j] {
                continue;
            }
            if best.is_none_or(|(_, bv)| grad[j] < bv) {
                best = Some((j, grad[j]));
            }
        }
        let stop_here = match best {
            None => true,
            Some((_, v)) => 2.0 * v >= -guard,
        };
        if stop_here {
            early_stop = Some(EarlyStop::NoDescentCandidate);
            break;
        }
        let (j_new, _) = best.expect("descent candidate exists");
        in_support[j_new] = true;
        selected.push(j_new);
        gathered.reserve(rows);
        for i in 0..rows {
            gathered.push(a.get(i, j_new));
        }

        let sol = kernels::nnls_on_gathered_columns(&gathered, rows, selected.len(), g)?;
        weights_on_support = sol.weights;
        // nnls residual is g - A w; the engine tracks A w - g.
        residual = sol.residual.iter().map(|v| -v).collect();
        history.push(sol.residual_norm);

        if sol.residual_norm <= stop_tol * g_norm {
            if iter < max_mc {
                early_stop = Some(EarlyStop::ToleranceReached);
            }
            break;
        }
        while next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == iter {
            rules.push(snapshot(&selected, &weights_on_support, &history, early_stop));
            next_checkpoint += 1;
        }
    }
    // Remaining checkpoints (early stop or final iteration) all see the final rule.
    while next_checkpoint < checkpoints.len() {
        rules.push(snapshot(&selected, &weights_on_support, &history, early_stop));
        next_checkpoint += 1;
    }
    debug_assert!(history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + g_norm)));
    Ok(rules)
}

/// Residual of the rule under the full, uncompressed cost: materializes the
/// dense manifold matrix (budget-guarded) and evaluates the data rows only
/// (no regularization row). Oracle path for bound-tightness reports.
pub fn residual_standard(
    ds: &TrainingDataset,
    rule: &SparseRule,
    mem_budget_bytes: u64,
) -> Result<f64, TrainingError> {
    if rule.num_summands != ds.num_summands() {
        return Err(TrainingError::DimensionMismatch {
            what: "rule weights",
            expected: ds.num_summands(),
            got: rule.num_summands,
        });
    }
    let dense = manifold::assemble_dense(ds, mem_budget_bytes)?;
    let dev: Vec<f64> =
        rule.weights.iter().zip(ds.truth_weights()).map(|(w, t)| w - t).collect();
    Ok(norm2(&dense.matrix().matvec(&dev)?))
}
