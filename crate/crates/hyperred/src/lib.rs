//! Hyper-reduction training toolkit.
//!
//! Builds sparse empirical quadrature and cell-based cubature rules from PDE
//! snapshot data. The training problem is posed on the solution manifold
//! matrix of all summand evaluations; a structured compression stage shrinks
//! its equation count from `K * N_r` to `K_thin * N_r` before the greedy
//! solve, with a computable bound on the error this introduces. A 1D
//! reaction-diffusion benchmark exercises the full pipeline, from snapshot
//! generation through reduced-order and complexity-reduced simulation.

// Indexed loops mirror the banded/blocked matrix structure, and negated
// comparisons double as NaN guards on unvalidated input vectors.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchfem;
pub mod bounds;
pub mod cli_io;
pub mod compression;
pub mod kernels;
pub mod manifold;
pub mod training;
