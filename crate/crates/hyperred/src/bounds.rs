//! Computable error bounds relating the compressed training cost to the
//! full, uncompressed one.
//!
//! With `r_full` the full cost, `r_c` the compressed cost, `c_err` the
//! (effective) compression error, and `w~` the truth weights:
//!
//! - a posteriori: `r_full(w) <= r_c(w) + c_err * ||w - w~||`
//! - a priori:     `r_full(w) <= r_c(w) + c_err * (sqrt(M_c)/d_min *
//!   (eps + d^T w~) + ||w~||)`, with `eps = |d^T (w - w~)|`
//!
//! Both hold for any non-negative `w` with at most `M_c` nonzeros. The
//! deviation `eps` is instantiated with the achieved value, the tightest
//! admissible choice.

use crate::compression::CompressedDataset;
use crate::kernels::norm2;
use crate::training::SparseRule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("smallest regularization entry is {0}, bounds need it positive")]
    NonPositiveDMin(f64),
    #[error("rule covers {got} summands, dataset has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// All quantities entering the two bounds, plus the bounds themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    /// Compressed cost of the data rows (regularization row excluded).
    pub compressed_residual: f64,
    /// Compression error used in the bounds: exact tail energy, scaled by the
    /// group-sum prolongation norm for simplified cell datasets.
    pub compression_error: f64,
    /// `||w - w~||`.
    pub weight_deviation: f64,
    pub a_posteriori: f64,
    /// `|d^T (w - w~)|`.
    pub regularizer_deviation: f64,
    /// Smallest regularization entry.
    pub regularization_min: f64,
    /// `d^T w~`; the domain measure for quadrature/cell truth sums.
    pub truth_regularized_sum: f64,
    /// `||w~||`.
    pub truth_weight_norm: f64,
    /// Support size of the rule.
    pub support_size: usize,
    pub a_priori: f64,
}

fn report(cds: &CompressedDataset, rule: &SparseRule) -> Result<BoundReport, BoundError> {
    if rule.num_summands != cds.num_summands {
        return Err(BoundError::DimensionMismatch {
            expected: cds.num_summands,
            got: rule.num_summands,
        });
    }
    let d = &cds.regularization;
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if !(d_min > 0.0) {
        return Err(BoundError::NonPositiveDMin(d_min));
    }
    let dev: Vec<f64> =
        rule.weights.iter().zip(&cds.truth_weights).map(|(w, t)| w - t).collect();
    let compressed_residual = norm2(
        &cds.a_thin.matvec(&dev).expect("dimensions checked above"),
    );
    let weight_deviation = norm2(&dev);
    let regularizer_deviation: f64 =
        d.iter().zip(&dev).map(|(d, e)| d * e).sum::<f64>().abs();
    let truth_regularized_sum: f64 = d.iter().zip(&cds.truth_weights).map(|(d, w)| d * w).sum();
    let truth_weight_norm = norm2(&cds.truth_weights);
    let c_err = cds.effective_compression_error();
    let support_size = rule.support_size();

    let a_posteriori = compressed_residual + c_err * weight_deviation;
    let deviation_cap = (support_size as f64).sqrt() / d_min
        * (regularizer_deviation + truth_regularized_sum)
        + truth_weight_norm;
    let a_priori = compressed_residual + c_err * deviation_cap;

    Ok(BoundReport {
        compressed_residual,
        compression_error: c_err,
        weight_deviation,
        a_posteriori,
        regularizer_deviation,
        regularization_min: d_min,
        truth_regularized_sum,
        truth_weight_norm,
        support_size,
        a_priori,
    })
}

/// A posteriori bound on the full training cost. The returned report carries
/// every intermediate quantity, including the a priori bound.
pub fn aposteriori(cds: &CompressedDataset, rule: &SparseRule) -> Result<BoundReport, BoundError> {
    report(cds, rule)
}

/// A priori bound on the full training cost, independent of the weight
/// deviation. Same report as [`aposteriori`]; the two entry points mirror the
/// two statements of the bound.
pub fn apriori(cds: &CompressedDataset, rule: &SparseRule) -> Result<BoundReport, BoundError> {
    report(cds, rule)
}
