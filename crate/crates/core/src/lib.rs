//! Prediction-powered inference with power tuning.
//!
//! A small labeled sample `(X, Y)` is combined with model predictions `f(X)`
//! on the same rows and on a large unlabeled pool. The estimator minimizes
//! the rectified objective `L_n(θ) + λ·(L̃^f_N(θ) − L^f_n(θ))`, picks λ to
//! minimize the trace of its asymptotic covariance, and reports sandwich
//! confidence sets. `λ = 0` is classical inference on the labeled rows alone.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod inference;
pub mod losses;
pub mod solver;
pub mod stats;
pub mod tuning;

pub use data::{Dataset, Features, Ratio};
pub use error::{PpiError, Result};
pub use estimate::{estimate, EstimateConfig, EstimateDiagnostics, EstimateReport};
pub use grid::{GridSpec, GridStatistic};
pub use inference::{ConfidenceSet, HessianPath, SetShape};
pub use losses::{GlmFamily, LambdaRange, Loss};
pub use solver::{minimize_rectified, SolveDiagnostics, SolverOptions};
pub use tuning::{LambdaEstimate, LambdaPolicy};
