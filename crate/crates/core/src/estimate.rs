//! End-to-end estimation: choose λ, solve, build Σ̂ and the requested sets.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{PpiError, Result};
use crate::inference::{
    assemble_sigma, ci_coordinate, confidence_ellipse, confidence_rectangle, covariance_parts_with,
    one_step_estimate, ConfidenceSet, HessianPath, SetShape,
};
use crate::losses::Loss;
use crate::solver::{minimize_rectified, SolveDiagnostics, SolverOptions};
use crate::tuning::{apply_policy, lambda_plugin, preset, LambdaEstimate, LambdaPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub policy: LambdaPolicy,
    pub alpha: f64,
    pub shapes: Vec<SetShape>,
    /// Coordinate reported by the interval shape.
    pub coord: usize,
    pub solver: SolverOptions,
    /// Fixed λ ∈ [0, 1] of the pilot fit used for tuning.
    pub pilot_lambda: f64,
    pub hessian: HessianPath,
}

impl EstimateConfig {
    pub fn new(policy: LambdaPolicy, alpha: f64) -> Self {
        Self {
            policy,
            alpha,
            shapes: vec![SetShape::Interval],
            coord: 0,
            solver: SolverOptions::default(),
            pilot_lambda: 1.0,
            hessian: HessianPath::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateDiagnostics {
    pub policy: LambdaPolicy,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub converged: bool,
    pub hessian_path: HessianPath,
    pub lambda: Option<LambdaEstimate>,
    pub pilot: Option<SolveDiagnostics>,
    pub solver: Option<SolveDiagnostics>,
    pub one_step_ridge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub theta: Vec<f64>,
    pub lambda_raw: Option<f64>,
    pub lambda_used: f64,
    /// Row-major.
    pub sigma_hat: Vec<Vec<f64>>,
    pub sets: Vec<ConfidenceSet>,
    pub diagnostics: EstimateDiagnostics,
}

impl EstimateReport {
    pub fn interval(&self) -> Option<&crate::inference::Interval> {
        self.sets.iter().find_map(ConfidenceSet::as_interval)
    }
}

pub fn estimate(loss: &dyn Loss, data: &Dataset, config: &EstimateConfig) -> Result<EstimateReport> {
    data.check_compatible(loss)?;
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(PpiError::InvalidProbability(config.alpha));
    }
    if config.coord >= loss.dim() {
        return Err(PpiError::InvalidArgument(format!(
            "coordinate {} out of range for dimension {}",
            config.coord,
            loss.dim()
        )));
    }

    let mut pilot_diag = None;
    let mut solver_diag = None;
    let mut one_step_ridge = None;
    let (theta, lambda, lambda_used) = if config.policy.needs_plugin() {
        let pilot = minimize_rectified(loss, data, config.pilot_lambda, &config.solver)?;
        let raw = lambda_plugin(loss, data, pilot.theta.as_slice())?;
        let lambda = apply_policy(&raw, config.policy);
        let theta = match config.policy {
            LambdaPolicy::OneStep => {
                let os = one_step_estimate(
                    loss,
                    data,
                    pilot.theta.as_slice(),
                    lambda.lambda_used,
                    config.solver.ridge_floor,
                )?;
                one_step_ridge = Some(os.ridge);
                os.theta
            }
            _ => {
                let opts = SolverOptions {
                    initial_point: Some(pilot.theta.as_slice().to_vec()),
                    ..config.solver.clone()
                };
                let sol = minimize_rectified(loss, data, lambda.lambda_used, &opts)?;
                solver_diag = Some(sol.diagnostics);
                sol.theta
            }
        };
        pilot_diag = Some(pilot.diagnostics);
        let used = lambda.lambda_used;
        (theta, Some(lambda), used)
    } else {
        let used = preset(config.policy, data).lambda_used;
        let sol = minimize_rectified(loss, data, used, &config.solver)?;
        solver_diag = Some(sol.diagnostics);
        (sol.theta, None, used)
    };

    let parts = covariance_parts_with(loss, data, theta.as_slice(), lambda_used, config.hessian)?;
    let sigma = assemble_sigma(&parts)?;
    let n = data.n();
    let sets = config
        .shapes
        .iter()
        .map(|shape| match shape {
            SetShape::Interval => ci_coordinate(theta.as_slice(), &sigma, n, config.alpha, config.coord),
            SetShape::Rectangle => confidence_rectangle(theta.as_slice(), &sigma, n, config.alpha),
            SetShape::Ellipse => confidence_ellipse(theta.as_slice(), &sigma, n, config.alpha),
        })
        .collect::<Result<Vec<_>>>()?;

    let converged = solver_diag
        .as_ref()
        .or(pilot_diag.as_ref())
        .map(|d| d.converged)
        .unwrap_or(true);
    Ok(EstimateReport {
        theta: theta.iter().copied().collect(),
        lambda_raw: lambda.as_ref().map(|l| l.lambda_raw),
        lambda_used,
        sigma_hat: sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        sets,
        diagnostics: EstimateDiagnostics {
            policy: config.policy,
            n,
            big_n: data.big_n(),
            converged,
            hessian_path: parts.hessian_path,
            lambda,
            pilot: pilot_diag,
            solver: solver_diag,
            one_step_ridge,
        },
    })
}
