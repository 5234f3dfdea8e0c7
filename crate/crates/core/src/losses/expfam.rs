use nalgebra::DMatrix;

use super::{dot, LambdaRange, Loss};
use crate::error::{PpiError, Result};

/// Exponential-family regression model p_θ(y | x) = exp(T(x, y)ᵀθ − ψ(θ, x)).
///
/// The log-partition ψ does not depend on y, so its Hessian is the Hessian
/// of the loss.
pub trait ExponentialFamily: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn feature_dim(&self) -> usize;

    /// `out += scale · T(x, y)`
    fn add_statistic(&self, x: &[f64], y: f64, scale: f64, out: &mut [f64]);

    fn log_partition(&self, theta: &[f64], x: &[f64]) -> f64;
    fn add_log_partition_gradient(&self, theta: &[f64], x: &[f64], scale: f64, out: &mut [f64]);
    fn add_log_partition_hessian(&self, theta: &[f64], x: &[f64], scale: f64, out: &mut DMatrix<f64>);

    fn label_is_valid(&self, _y: f64) -> bool {
        true
    }
}

/// ℓ_θ(x, y) = −T(x, y)ᵀθ + ψ(θ, x).
#[derive(Debug, Clone)]
pub struct ExpFamilyLoss<F> {
    family: F,
}

impl<F: ExponentialFamily> ExpFamilyLoss<F> {
    pub fn new(family: F) -> Self {
        Self { family }
    }

    pub fn family(&self) -> &F {
        &self.family
    }
}

impl<F: ExponentialFamily> Loss for ExpFamilyLoss<F> {
    fn name(&self) -> &str {
        self.family.name()
    }

    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn feature_dim(&self) -> usize {
        self.family.feature_dim()
    }

    fn convexity_range(&self) -> LambdaRange {
        LambdaRange::UNIT
    }

    fn value(&self, theta: &[f64], x: &[f64], y: f64) -> f64 {
        let mut t = vec![0.0; theta.len()];
        self.family.add_statistic(x, y, 1.0, &mut t);
        -dot(&t, theta) + self.family.log_partition(theta, x)
    }

    fn add_gradient(&self, theta: &[f64], x: &[f64], y: f64, scale: f64, out: &mut [f64]) {
        self.family.add_statistic(x, y, -scale, out);
        self.family.add_log_partition_gradient(theta, x, scale, out);
    }

    fn add_hessian(&self, theta: &[f64], x: &[f64], _y: f64, scale: f64, out: &mut DMatrix<f64>) {
        self.family.add_log_partition_hessian(theta, x, scale, out);
    }

    fn label_is_valid(&self, y: f64) -> bool {
        self.family.label_is_valid(y)
    }
}

/// k-class softmax regression; θ is k blocks of d coefficients, class labels are 0..k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulticlassLogistic {
    classes: usize,
    features: usize,
}

impl MulticlassLogistic {
    pub fn classes(&self) -> usize {
        self.classes
    }

    fn scores(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let d = self.features;
        (0..self.classes).map(|c| dot(&theta[c * d..(c + 1) * d], x)).collect()
    }

    fn probabilities(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let s = self.scores(theta, x);
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }
}

pub fn make_multiclass_logistic(classes: usize, features: usize) -> Result<ExpFamilyLoss<MulticlassLogistic>> {
    if classes < 2 {
        return Err(PpiError::InvalidArgument(format!(
            "multiclass logistic needs at least 2 classes, got {classes}"
        )));
    }
    if features < 1 {
        return Err(PpiError::InvalidArgument(
            "multiclass logistic needs at least one feature".into(),
        ));
    }
    Ok(ExpFamilyLoss::new(MulticlassLogistic { classes, features }))
}

impl ExponentialFamily for MulticlassLogistic {
    fn name(&self) -> &str {
        "multiclass"
    }

    fn dim(&self) -> usize {
        self.classes * self.features
    }

    fn feature_dim(&self) -> usize {
        self.features
    }

    fn add_statistic(&self, x: &[f64], y: f64, scale: f64, out: &mut [f64]) {
        let c = y as usize;
        let d = self.features;
        for (o, xi) in out[c * d..(c + 1) * d].iter_mut().zip(x) {
            *o += scale * xi;
        }
    }

    fn log_partition(&self, theta: &[f64], x: &[f64]) -> f64 {
        let s = self.scores(theta, x);
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    fn add_log_partition_gradient(&self, theta: &[f64], x: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.features;
        for (c, p) in self.probabilities(theta, x).into_iter().enumerate() {
            for (o, xi) in out[c * d..(c + 1) * d].iter_mut().zip(x) {
                *o += scale * p * xi;
            }
        }
    }

    // block (a, b) = (p_a δ_ab − p_a p_b) · x xᵀ
    fn add_log_partition_hessian(&self, theta: &[f64], x: &[f64], scale: f64, out: &mut DMatrix<f64>) {
        let d = self.features;
        let p = self.probabilities(theta, x);
        for a in 0..self.classes {
            for b in 0..self.classes {
                let w = scale * (if a == b { p[a] } else { 0.0 } - p[a] * p[b]);
                if w == 0.0 {
                    continue;
                }
                for j in 0..d {
                    for i in 0..d {
                        out[(a * d + i, b * d + j)] += w * (x[i] * x[j]);
                    }
                }
            }
        }
    }

    fn label_is_valid(&self, y: f64) -> bool {
        y >= 0.0 && y.fract() == 0.0 && (y as usize) < self.classes
    }
}
