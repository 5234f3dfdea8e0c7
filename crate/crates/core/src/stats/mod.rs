//! Statistics primitives: quantiles, empirical covariances, symmetric matrix functions.

mod covariance;
mod linalg;
mod quantile;
pub mod special;

pub use covariance::{empirical_covariance, empirical_cross_covariance, pooled_covariance};
pub use linalg::{inv_sqrt_psd, symmetric_condition, symmetric_inverse, trace, MAX_CONDITION};
pub use quantile::{chi2_quantile, normal_quantile, QuantileCache};

pub(crate) use covariance::symmetrize;
