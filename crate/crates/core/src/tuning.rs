//! Plug-in choice of λ minimizing the trace of the asymptotic covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Ratio};
use crate::error::{PpiError, Result};
use crate::inference::hessian_general;
use crate::losses::{GradientRows, Loss};
use crate::stats::{
    empirical_covariance, empirical_cross_covariance, pooled_covariance, symmetric_inverse, trace,
};

/// Denominators below this are treated as "predictions carry no signal".
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "lambda")]
pub enum LambdaPolicy {
    /// λ̂ clipped to [0, 1].
    ClipUnit,
    /// λ̂ used as is; the estimate comes from one Newton step off the pilot.
    OneStep,
    Fixed(f64),
    /// λ = 1/(1 + n/N).
    AipwPreset,
}

impl LambdaPolicy {
    /// Clipping for losses convex only on [0, 1], pass-through otherwise.
    pub fn default_for(loss: &dyn Loss) -> Self {
        if loss.convexity_range().is_unbounded() {
            LambdaPolicy::OneStep
        } else {
            LambdaPolicy::ClipUnit
        }
    }

    pub fn needs_plugin(self) -> bool {
        matches!(self, LambdaPolicy::ClipUnit | LambdaPolicy::OneStep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub lambda_raw: f64,
    pub lambda_used: f64,
    pub policy: LambdaPolicy,
    pub pilot_theta: Vec<f64>,
    pub numerator: f64,
    pub denominator: f64,
    /// The prediction-gradient variance vanished and λ̂ fell back to 0.
    pub degenerate: bool,
    #[serde(skip)]
    pub ratio: Ratio,
}

/// Plug-in matrices frozen at the pilot, from which both λ̂ and the trace
/// objective Q(λ) are computed.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceObjective {
    /// Ĥ⁻¹ with Ĥ the labeled-only Hessian.
    pub hessian_inv: DMatrix<f64>,
    /// Cov_n(∇ℓ).
    pub label_cov: DMatrix<f64>,
    /// Cov_n(∇ℓ, ∇ℓ^f) + Cov_n(∇ℓ^f, ∇ℓ).
    pub cross_sum: DMatrix<f64>,
    /// Cov_{N+n}(∇ℓ^f).
    pub prediction_cov: DMatrix<f64>,
    pub ratio: Ratio,
}

impl TraceObjective {
    pub fn at(loss: &dyn Loss, data: &Dataset, pilot: &[f64]) -> Result<Self> {
        let hessian_inv = symmetric_inverse(&hessian_general(loss, data, pilot)?, "hessian")?;
        let rows = GradientRows::compute(loss, data, pilot)?;
        let cross = empirical_cross_covariance(&rows.labeled, &rows.labeled_pred)?;
        Ok(Self {
            hessian_inv,
            label_cov: empirical_covariance(&rows.labeled)?,
            cross_sum: &cross + cross.transpose(),
            prediction_cov: pooled_covariance(&[&rows.labeled_pred, &rows.unlabeled_pred])?,
            ratio: data.ratio(),
        })
    }

    fn sandwich_trace(&self, m: &DMatrix<f64>) -> f64 {
        trace(&(&self.hessian_inv * m * &self.hessian_inv))
    }

    pub fn numerator(&self) -> f64 {
        self.sandwich_trace(&self.cross_sum)
    }

    pub fn denominator(&self) -> f64 {
        2.0 * (1.0 + self.ratio.value()) * self.sandwich_trace(&self.prediction_cov)
    }

    /// Tr(Ĥ⁻¹[Cov_n(∇ℓ) − λ·cross_sum + (1 + r)λ²·Cov_{N+n}(∇ℓ^f)]Ĥ⁻¹).
    pub fn value(&self, lambda: f64) -> f64 {
        let r = self.ratio.value();
        let m = &self.label_cov - &self.cross_sum * lambda + &self.prediction_cov * ((1.0 + r) * lambda * lambda);
        self.sandwich_trace(&m)
    }
}

fn finish(numerator: f64, denominator: f64, pilot: Vec<f64>, ratio: Ratio) -> Result<LambdaEstimate> {
    if !numerator.is_finite() || !denominator.is_finite() {
        return Err(PpiError::NonFiniteLoss);
    }
    let degenerate = denominator < DEGENERATE_DENOMINATOR;
    let lambda_raw = if degenerate { 0.0 } else { numerator / denominator };
    Ok(LambdaEstimate {
        lambda_raw,
        lambda_used: lambda_raw,
        policy: LambdaPolicy::OneStep,
        pilot_theta: pilot,
        numerator,
        denominator,
        degenerate,
        ratio,
    })
}

/// λ̂ = Tr(Ĥ⁻¹(C + Cᵀ)Ĥ⁻¹) / (2(1 + r)·Tr(Ĥ⁻¹·Cov_{N+n}(∇ℓ^f)·Ĥ⁻¹)) with
/// C = Cov_n(∇ℓ, ∇ℓ^f) and Ĥ the labeled Hessian, all at the pilot.
///
/// The result carries `lambda_used = lambda_raw`; see [`apply_policy`].
pub fn lambda_plugin(loss: &dyn Loss, data: &Dataset, pilot: &[f64]) -> Result<LambdaEstimate> {
    let q = TraceObjective::at(loss, data, pilot)?;
    finish(q.numerator(), q.denominator(), pilot.to_vec(), data.ratio())
}

/// Mean estimation: λ̂ = Cov_n(Y, f) / ((1 + r)·Cov_{N+n}(f)).
pub fn lambda_plugin_mean(data: &Dataset) -> Result<LambdaEstimate> {
    let col = |v: &[f64]| DMatrix::from_column_slice(v.len(), 1, v);
    let (y, f, ft) = (col(data.labels()), col(data.labeled_predictions()), col(data.unlabeled_predictions()));
    let cov = empirical_cross_covariance(&y, &f)?[(0, 0)];
    let var = pooled_covariance(&[&f, &ft])?[(0, 0)];
    let r = data.ratio().value();
    finish(cov, (1.0 + r) * var, Vec::new(), data.ratio())
}

pub fn apply_policy(estimate: &LambdaEstimate, policy: LambdaPolicy) -> LambdaEstimate {
    let lambda_used = match policy {
        LambdaPolicy::ClipUnit => estimate.lambda_raw.clamp(0.0, 1.0),
        LambdaPolicy::OneStep => estimate.lambda_raw,
        LambdaPolicy::Fixed(l) => l,
        LambdaPolicy::AipwPreset => 1.0 / (1.0 + estimate.ratio.value()),
    };
    LambdaEstimate { lambda_used, policy, ..estimate.clone() }
}

/// λ for policies that need no plug-in, with NaN raw diagnostics.
pub fn preset(policy: LambdaPolicy, data: &Dataset) -> LambdaEstimate {
    let blank = LambdaEstimate {
        lambda_raw: f64::NAN,
        lambda_used: f64::NAN,
        policy,
        pilot_theta: Vec::new(),
        numerator: f64::NAN,
        denominator: f64::NAN,
        degenerate: false,
        ratio: data.ratio(),
    };
    apply_policy(&blank, policy)
}
