//! Damped Newton minimization of the rectified objective.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{PpiError, Result};
use crate::losses::{rectified_gradient, rectified_hessian, rectified_objective, Loss};

const RIDGE_CEILING: f64 = 1e-2;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once ‖∇L^PP_λ‖_∞ falls to this value.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// First ridge tried when the Newton system will not factor.
    pub ridge_floor: f64,
    pub line_search_shrink: f64,
    pub armijo_constant: f64,
    /// Defaults to the zero vector.
    pub initial_point: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 100,
            ridge_floor: 1e-10,
            line_search_shrink: 0.5,
            armijo_constant: 1e-4,
            initial_point: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("ridge_floor", self.ridge_floor),
            ("armijo_constant", self.armijo_constant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PpiError::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(PpiError::InvalidArgument("max_iterations must be positive".into()));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(PpiError::InvalidArgument(format!(
                "line_search_shrink must lie in (0, 1), got {}",
                self.line_search_shrink
            )));
        }
        Ok(())
    }

    fn start(&self, dim: usize) -> Result<DVector<f64>> {
        match &self.initial_point {
            None => Ok(DVector::zeros(dim)),
            Some(p) if p.len() == dim => Ok(DVector::from_column_slice(p)),
            Some(p) => Err(PpiError::DimensionMismatch {
                field: "initial_point",
                expected: dim,
                found: p.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    /// Largest ridge added to the Newton system, 0 when none was needed.
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub theta: DVector<f64>,
    pub diagnostics: SolveDiagnostics,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn with_ridge(h: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let mut m = h.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    m
}

/// Solves H·d = −g by Cholesky, escalating a diagonal ridge ×10 from the floor
/// to 1e-2 when H does not factor. Returns the direction and the ridge used.
pub(crate) fn newton_direction(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    ridge_floor: f64,
) -> Option<(DVector<f64>, f64)> {
    let mut ridge = 0.0;
    loop {
        let m = if ridge == 0.0 { h.clone() } else { with_ridge(h, ridge) };
        if let Some(chol) = m.cholesky() {
            let d = -chol.solve(g);
            if d.iter().all(|v| v.is_finite()) {
                return Some((d, ridge));
            }
        }
        ridge = if ridge == 0.0 { ridge_floor } else { ridge * 10.0 };
        if ridge > RIDGE_CEILING * (1.0 + 1e-9) {
            return None;
        }
    }
}

/// θ^PP_λ = argmin_θ L_n(θ) + λ(L̃^f_N(θ) − L^f_n(θ)).
///
/// Non-convergence is soft: the last (lowest-objective) iterate comes back
/// with `converged = false`.
pub fn minimize_rectified(
    loss: &dyn Loss,
    data: &Dataset,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    opts.validate()?;
    let range = loss.convexity_range();
    if !lambda.is_finite() || !range.contains(lambda) {
        return Err(PpiError::LambdaOutsideConvexity { lambda, lo: range.lo, hi: range.hi });
    }
    data.check_compatible(loss)?;

    let mut theta = opts.start(loss.dim())?;
    let mut value = rectified_objective(loss, data, theta.as_slice(), lambda)?;
    let mut grad = rectified_gradient(loss, data, theta.as_slice(), lambda)?;
    let mut diag = SolveDiagnostics {
        iterations: 0,
        gradient_norm: inf_norm(&grad),
        converged: false,
        objective_trace: vec![value],
        ridge: 0.0,
    };

    while diag.iterations < opts.max_iterations {
        if diag.gradient_norm <= opts.gradient_tolerance {
            diag.converged = true;
            break;
        }
        let hess = rectified_hessian(loss, data, theta.as_slice(), lambda)?;
        let (dir, ridge) = match newton_direction(&hess, &grad, opts.ridge_floor) {
            Some((d, r)) if d.dot(&grad) < 0.0 => (d, r),
            _ => (-&grad, RIDGE_CEILING),
        };
        diag.ridge = diag.ridge.max(ridge);
        let slope = grad.dot(&dir);

        let mut step = 1.0;
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial = &theta + &dir * step;
            match rectified_objective(loss, data, trial.as_slice(), lambda) {
                Ok(v) if v <= value + opts.armijo_constant * step * slope => {
                    accepted = Some((trial, v));
                    break;
                }
                // Near the optimum the decrease sinks below round-off; take
                // the step if it does not raise the objective.
                Ok(v) if step == 1.0 && v <= value => {
                    let g = rectified_gradient(loss, data, trial.as_slice(), lambda)?;
                    if inf_norm(&g) < diag.gradient_norm {
                        accepted = Some((trial, v));
                        break;
                    }
                }
                Ok(_) | Err(PpiError::NonFiniteLoss) => {}
                Err(e) => return Err(e),
            }
            step *= opts.line_search_shrink;
        }
        let Some((next, next_value)) = accepted else {
            break;
        };
        theta = next;
        value = next_value;
        grad = rectified_gradient(loss, data, theta.as_slice(), lambda)?;
        diag.iterations += 1;
        diag.gradient_norm = inf_norm(&grad);
        diag.objective_trace.push(value);
    }
    if diag.gradient_norm <= opts.gradient_tolerance {
        diag.converged = true;
    }
    Ok(Solution { theta, diagnostics: diag })
}

/// Closed form for the mean loss: Ȳ + λ(mean f̃ − mean f).
pub fn mean_point_estimate(data: &Dataset, lambda: f64) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let y = mean(data.labels());
    if lambda == 0.0 {
        return y;
    }
    y + lambda * (mean(data.unlabeled_predictions()) - mean(data.labeled_predictions()))
}
