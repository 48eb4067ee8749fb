//! Joint recovery of low-rank matrices sharing a column space from
//! block-wise linear sketches.
//!
//! A target `X = [X_1 ... X_K]` of shape `M x (N*K)` is observed through
//! `L` scalar sketches per block, `y_{l,k} = <B_{l,k}, X_k> + w_{l,k}`.
//! The crate provides:
//!
//! * [`norms`] - the maximum-block-Frobenius norm, and an ADMM solver for
//!   the `$`-norm `inf { ||U||_F ||V||_{inf,F} : U V^T = X }` via its
//!   semidefinite characterization;
//! * [`estimator`] - the doubly norm-constrained least-squares estimator,
//!   solved by an ADMM whose per-block subproblems are norm-constrained
//!   least squares handled through a cached SVD and a Lagrangian bisection;
//! * [`baselines`] - a spectral column-space estimator and a factored
//!   gradient-descent refinement for comparison;
//! * [`theory`] - evaluable sample-rate and minimax-risk formulas plus the
//!   random packing-set generator behind the lower bound;
//! * [`experiments`] - a deterministic Monte Carlo harness sweeping
//!   `(K, L)` grids and emitting phase diagrams;
//! * [`sensing`] / [`io`] - data generation, measurement, and the text
//!   file formats shared with the command-line front end.
//!
//! All numeric code is generic over a [`Scalar`] (implemented for `f32`
//! and `f64`); concrete `f64` aliases are exported at the crate root.

// Negated comparisons like `!(v > 0)` are deliberate in config validation:
// unlike `v <= 0` they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod admm;

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod rng;
pub mod scalar;
pub mod sensing;
pub mod theory;

pub use error::Error;
pub use scalar::Scalar;

/// `f64` instantiations of the core types.
pub type SymMatrixF64 = linalg::SymMatrix<f64>;
pub type BlockMatrixF64 = linalg::BlockMatrix<f64>;
pub type DollarNormResultF64 = norms::DollarNormResult<f64>;
pub type EstimateResultF64 = estimator::EstimateResult<f64>;
pub type SweepConfigF64 = experiments::SweepConfig<f64>;
