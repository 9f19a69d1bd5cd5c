//! Sparse precision-matrix estimation with the entropy adjusted graphical
//! lasso (EAGL) and its comparators.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs: dense symmetric linear algebra, the graphical
//! lasso solver, a proximal-gradient certifier, ridge and elastic-net
//! estimators, the simulation models, loss and graph-recovery metrics,
//! penalty tuning, and the LDA / minimum-variance portfolio applications.
//! File formats, the CLI and parallel drivers live in the `eagl` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose to treat NaN as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod apps;
pub mod eigen;
pub mod error;
pub mod estimators;
pub mod glasso;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod tuning;

pub use eigen::{sym_eigen, EigenDecomposition};
pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, Method, PrecisionEstimate, SolverOptions};
pub use glasso::{solve_glasso, GlassoProblem, SolveReport};
pub use matrix::{Cholesky, Matrix, SymMatrix};
pub use metrics::{GraphReport, LossReport};
pub use models::{GroundTruth, ModelId, ModelSpec};
pub use tuning::{Criterion, TuningGrid, TuningResult};
