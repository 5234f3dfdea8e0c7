use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{dot, LambdaRange, Loss};

/// Log-partition ψ of a canonical-link GLM, ℓ_θ(x, y) = −y·xᵀθ + ψ(xᵀθ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmFamily {
    /// ψ(s) = s²/2
    Linear,
    /// ψ(s) = log(1 + eˢ)
    Logistic,
    /// ψ(s) = eˢ
    Poisson,
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

impl GlmFamily {
    pub fn psi(self, s: f64) -> f64 {
        match self {
            GlmFamily::Linear => 0.5 * s * s,
            GlmFamily::Logistic => {
                if s > 0.0 {
                    s + (-s).exp().ln_1p()
                } else {
                    s.exp().ln_1p()
                }
            }
            GlmFamily::Poisson => s.exp(),
        }
    }

    pub fn psi_prime(self, s: f64) -> f64 {
        match self {
            GlmFamily::Linear => s,
            GlmFamily::Logistic => sigmoid(s),
            GlmFamily::Poisson => s.exp(),
        }
    }

    pub fn psi_double_prime(self, s: f64) -> f64 {
        match self {
            GlmFamily::Linear => 1.0,
            GlmFamily::Logistic => {
                let p = sigmoid(s);
                p * (1.0 - p)
            }
            GlmFamily::Poisson => s.exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Linear => "linear",
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
        }
    }

    fn label_is_valid(self, y: f64) -> bool {
        match self {
            GlmFamily::Linear => true,
            GlmFamily::Logistic => (0.0..=1.0).contains(&y),
            GlmFamily::Poisson => y >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmLoss {
    family: GlmFamily,
    dim: usize,
}

impl GlmLoss {
    pub fn new(family: GlmFamily, dim: usize) -> Self {
        Self { family, dim }
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }
}

/// GLM loss over `dim` features (and `dim` coefficients).
pub fn make_glm(family: GlmFamily, dim: usize) -> GlmLoss {
    GlmLoss::new(family, dim)
}

impl Loss for GlmLoss {
    fn name(&self) -> &str {
        self.family.name()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn convexity_range(&self) -> LambdaRange {
        LambdaRange::UNIT
    }

    fn value(&self, theta: &[f64], x: &[f64], y: f64) -> f64 {
        let s = dot(theta, x);
        -y * s + self.family.psi(s)
    }

    fn add_gradient(&self, theta: &[f64], x: &[f64], y: f64, scale: f64, out: &mut [f64]) {
        let w = scale * (self.family.psi_prime(dot(theta, x)) - y);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += w * xi;
        }
    }

    fn add_hessian(&self, theta: &[f64], x: &[f64], _y: f64, scale: f64, out: &mut DMatrix<f64>) {
        let w = scale * self.family.psi_double_prime(dot(theta, x));
        let p = self.dim;
        for j in 0..p {
            for i in 0..p {
                out[(i, j)] += w * (x[i] * x[j]);
            }
        }
    }

    fn label_is_valid(&self, y: f64) -> bool {
        self.family.label_is_valid(y)
    }

    fn glm_family(&self) -> Option<GlmFamily> {
        Some(self.family)
    }
}
