//! Per-observation losses ℓ_θ(x, y) and the rectified objective built from them.
//!
//! A [`Loss`] is a pure function of `(θ, x, y)`. Gradients and Hessians are
//! accumulated into caller-owned buffers so the empirical averages over tens
//! of thousands of rows do not allocate per observation.

use std::fmt;

use nalgebra::{DMatrix, DVector};

mod expfam;
mod glm;
mod mean;
mod rectified;

pub use expfam::{make_multiclass_logistic, ExpFamilyLoss, ExponentialFamily, MulticlassLogistic};
pub use glm::{make_glm, GlmFamily, GlmLoss};
pub use mean::{make_mean_loss, MeanLoss};
pub use rectified::{
    empirical_losses, rectified_gradient, rectified_hessian, rectified_objective, GradientRows,
};

/// Closed interval of λ over which the rectified objective is guaranteed convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRange {
    pub lo: f64,
    pub hi: f64,
}

impl LambdaRange {
    pub const UNIT: LambdaRange = LambdaRange { lo: 0.0, hi: 1.0 };
    pub const ALL: LambdaRange = LambdaRange { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lo && lambda <= self.hi
    }

    pub fn clamp(&self, lambda: f64) -> f64 {
        lambda.max(self.lo).min(self.hi)
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

pub trait Loss: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Parameter dimension d_θ.
    fn dim(&self) -> usize;

    /// Number of feature columns the loss reads; 0 when it ignores x.
    fn feature_dim(&self) -> usize;

    fn convexity_range(&self) -> LambdaRange;

    fn value(&self, theta: &[f64], x: &[f64], y: f64) -> f64;

    /// `out += scale · ∇ℓ_θ(x, y)`
    fn add_gradient(&self, theta: &[f64], x: &[f64], y: f64, scale: f64, out: &mut [f64]);

    /// `out += scale · ∇²ℓ_θ(x, y)`
    fn add_hessian(&self, theta: &[f64], x: &[f64], y: f64, scale: f64, out: &mut DMatrix<f64>);

    fn label_is_valid(&self, _y: f64) -> bool {
        true
    }

    /// The log-partition family when this is a scalar-index GLM.
    fn glm_family(&self) -> Option<GlmFamily> {
        None
    }

    fn gradient(&self, theta: &[f64], x: &[f64], y: f64) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.add_gradient(theta, x, y, 1.0, g.as_mut_slice());
        g
    }

    fn hessian(&self, theta: &[f64], x: &[f64], y: f64) -> DMatrix<f64> {
        let p = self.dim();
        let mut h = DMatrix::zeros(p, p);
        self.add_hessian(theta, x, y, 1.0, &mut h);
        h
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
pub(crate) mod fd {
    //! Central finite-difference oracles shared by the loss tests.
    use super::Loss;
    use nalgebra::{DMatrix, DVector};

    pub fn gradient(loss: &dyn Loss, theta: &[f64], x: &[f64], y: f64) -> DVector<f64> {
        let p = theta.len();
        let mut g = DVector::zeros(p);
        let mut t = theta.to_vec();
        for j in 0..p {
            let h = 1e-5 * theta[j].abs().max(1.0);
            t[j] = theta[j] + h;
            let up = loss.value(&t, x, y);
            t[j] = theta[j] - h;
            let down = loss.value(&t, x, y);
            t[j] = theta[j];
            g[j] = (up - down) / (2.0 * h);
        }
        g
    }

    pub fn hessian(loss: &dyn Loss, theta: &[f64], x: &[f64], y: f64) -> DMatrix<f64> {
        let p = theta.len();
        let mut hm = DMatrix::zeros(p, p);
        let mut t = theta.to_vec();
        for j in 0..p {
            let h = 1e-5 * theta[j].abs().max(1.0);
            t[j] = theta[j] + h;
            let up = loss.gradient(&t, x, y);
            t[j] = theta[j] - h;
            let down = loss.gradient(&t, x, y);
            t[j] = theta[j];
            hm.set_column(j, &((up - down) / (2.0 * h)));
        }
        hm
    }

    /// max |a − b| / max(1, |b|∞)
    pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1.0)
    }

    pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1.0)
    }
}
