use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Ratio};
use crate::error::{PpiError, Result};
use crate::losses::{rectified_gradient, rectified_hessian, GradientRows, Loss};
use crate::stats::{
    empirical_covariance, pooled_covariance, symmetric_condition, symmetric_inverse, symmetrize,
    MAX_CONDITION,
};

/// Which plug-in Hessian feeds the sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianPath {
    /// Pooled over all N + n feature rows for GLMs when λ ≠ 0, labeled-only otherwise.
    #[default]
    Auto,
    Pooled,
    Labeled,
}

impl HessianPath {
    pub fn resolve(self, loss: &dyn Loss, lambda: f64) -> HessianPath {
        match self {
            HessianPath::Auto if loss.glm_family().is_some() && lambda != 0.0 => HessianPath::Pooled,
            HessianPath::Auto => HessianPath::Labeled,
            other => other,
        }
    }
}

fn check_theta(loss: &dyn Loss, theta: &[f64]) -> Result<()> {
    if theta.len() != loss.dim() {
        return Err(PpiError::DimensionMismatch {
            field: "theta",
            expected: loss.dim(),
            found: theta.len(),
        });
    }
    Ok(())
}

/// (1/(N+n))·(Σ ψ″(Xᵢᵀθ)XᵢXᵢᵀ + Σ ψ″(X̃ᵢᵀθ)X̃ᵢX̃ᵢᵀ).
pub fn hessian_glm(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_theta(loss, theta)?;
    let family = loss.glm_family().ok_or_else(|| {
        PpiError::InvalidArgument(format!("pooled Hessian needs a GLM loss, got `{}`", loss.name()))
    })?;
    let unlabeled = data
        .unlabeled_features()
        .ok_or_else(|| PpiError::MissingFeatures(loss.name().to_string()))?;
    let d = loss.dim();
    if data.feature_dim() != d {
        return Err(PpiError::DimensionMismatch { field: "features", expected: d, found: data.feature_dim() });
    }
    let mut h = DMatrix::zeros(d, d);
    let rows = (0..data.n()).map(|i| data.labeled_x(i)).chain((0..unlabeled.nrows()).map(|i| unlabeled.row(i)));
    for x in rows {
        let s: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = family.psi_double_prime(s);
        for j in 0..d {
            for i in 0..d {
                h[(i, j)] += w * (x[i] * x[j]);
            }
        }
    }
    h /= (data.n() + data.big_n()) as f64;
    Ok(h)
}

/// (1/n)·Σ ∇²ℓ_θ(Xᵢ, Yᵢ) over the labeled sample.
pub fn hessian_general(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    rectified_hessian(loss, data, theta, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichParts {
    pub hessian: DMatrix<f64>,
    /// λ²·Cov_{N+n}(∇ℓ^f), pooled over labeled and unlabeled predictions.
    pub v_f: DMatrix<f64>,
    /// Cov_n(∇ℓ − λ∇ℓ^f).
    pub v_delta: DMatrix<f64>,
    pub ratio: Ratio,
    pub hessian_path: HessianPath,
}

pub fn covariance_parts(loss: &dyn Loss, data: &Dataset, theta: &[f64], lambda: f64) -> Result<SandwichParts> {
    covariance_parts_with(loss, data, theta, lambda, HessianPath::Auto)
}

pub fn covariance_parts_with(
    loss: &dyn Loss,
    data: &Dataset,
    theta: &[f64],
    lambda: f64,
    path: HessianPath,
) -> Result<SandwichParts> {
    let path = path.resolve(loss, lambda);
    let hessian = match path {
        HessianPath::Pooled => hessian_glm(loss, data, theta)?,
        _ => hessian_general(loss, data, theta)?,
    };
    let p = loss.dim();
    let (v_f, v_delta) = if lambda == 0.0 {
        // classical: prediction gradients are never evaluated
        let rows = GradientRows::labeled_only(loss, data, theta)?;
        (DMatrix::zeros(p, p), empirical_covariance(&rows)?)
    } else {
        let rows = GradientRows::compute(loss, data, theta)?;
        let pooled = pooled_covariance(&[&rows.labeled_pred, &rows.unlabeled_pred])?;
        (pooled * (lambda * lambda), empirical_covariance(&rows.delta(lambda))?)
    };
    Ok(SandwichParts { hessian, v_f, v_delta, ratio: data.ratio(), hessian_path: path })
}

/// Σ̂ = Ĥ⁻¹(r·V̂_f + V̂_Δ)Ĥ⁻¹, symmetrized.
pub fn assemble_sigma(parts: &SandwichParts) -> Result<DMatrix<f64>> {
    let h_inv = symmetric_inverse(&parts.hessian, "hessian")?;
    let middle = &parts.v_f * parts.ratio.value() + &parts.v_delta;
    let mut sigma = &h_inv * middle * &h_inv;
    symmetrize(&mut sigma);
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneStep {
    pub theta: DVector<f64>,
    /// Diagonal ridge added to make the Newton system solvable, 0 if none.
    pub ridge: f64,
}

/// θ_pilot − (∇²L^PP_λ)⁻¹∇L^PP_λ, evaluated once at the pilot. λ may lie
/// outside the convexity range.
pub fn one_step_estimate(
    loss: &dyn Loss,
    data: &Dataset,
    pilot: &[f64],
    lambda: f64,
    ridge_floor: f64,
) -> Result<OneStep> {
    let g = rectified_gradient(loss, data, pilot, lambda)?;
    let h = rectified_hessian(loss, data, pilot, lambda)?;
    let mut ridge = 0.0;
    loop {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        let condition = symmetric_condition(&m);
        if condition <= MAX_CONDITION {
            if let Some(step) = m.lu().solve(&g) {
                let theta = DVector::from_column_slice(pilot) - step;
                if theta.iter().all(|v| v.is_finite()) {
                    return Ok(OneStep { theta, ridge });
                }
            }
        }
        ridge = if ridge == 0.0 { ridge_floor } else { ridge * 10.0 };
        if ridge > 1e-2 * (1.0 + 1e-9) {
            return Err(PpiError::SingularMatrix { name: "one-step hessian", condition });
        }
    }
}
