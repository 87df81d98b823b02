//! Sparse partial-correlation graph estimation with the CONCORD convex
//! pseudo-likelihood.
//!
//! The estimator minimizes
//!
//! ```text
//! F(Ω) = -Σ log ω_ii + ½ tr(Ω S Ω) + Σ_{i≠j} Λ_ij |ω_ij|
//! ```
//!
//! over symmetric `Ω` with positive diagonal, where `S = YᵀY / n` is the
//! sample covariance. Four solvers are provided:
//!
//! - `ccista_0` / `ccista_1`: proximal gradient (ISTA) with a constant or
//!   Barzilai-Borwein initial step,
//! - `ccfista_0` / `ccfista_1`: accelerated proximal gradient (FISTA) with a
//!   constant or previous-step initial step,
//! - `concord`: cyclic coordinate-wise descent,
//! - `pnopt`: proximal Newton with a coordinate-descent lasso subproblem.
//!
//! ```
//! use concord::{model::{CovarianceMatrix, PenaltyMatrix}, solvers::{self, Problem, SolverConfig, Variant}};
//! use ndarray::array;
//!
//! let s = CovarianceMatrix::new(array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
//! let problem = Problem::from_covariance(s);
//! let penalty = PenaltyMatrix::uniform(2, 0.6).unwrap();
//! let result = solvers::solve(&problem, &penalty, &SolverConfig::new(Variant::CcIsta0)).unwrap();
//! assert!(result.converged);
//! assert_eq!(result.estimate.nnz_offdiag(), 0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod certificates;
pub mod cli;
mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod model;
pub mod prox;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Exec;
