//! Empirical losses L_n, L^f_n, L̃^f_N and the rectified objective
//! L_n(θ) + λ·(L̃^f_N(θ) − L^f_n(θ)).
//!
//! When λ = 0 the prediction terms are skipped entirely, so the classical
//! objective never touches prediction fields.

use nalgebra::{DMatrix, DVector};

use super::Loss;
use crate::data::Dataset;
use crate::error::{PpiError, Result};

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

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PpiError::NonFiniteLoss)
    }
}

fn mean_labeled(loss: &dyn Loss, data: &Dataset, theta: &[f64], ys: &[f64]) -> f64 {
    let n = data.n();
    (0..n).map(|i| loss.value(theta, data.labeled_x(i), ys[i])).sum::<f64>() / n as f64
}

fn mean_unlabeled(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> f64 {
    let m = data.big_n();
    let f = data.unlabeled_predictions();
    (0..m).map(|i| loss.value(theta, data.unlabeled_x(i), f[i])).sum::<f64>() / m as f64
}

/// (L_n(θ), L^f_n(θ), L̃^f_N(θ)).
pub fn empirical_losses(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> Result<(f64, f64, f64)> {
    check_theta(loss, theta)?;
    Ok((
        finite(mean_labeled(loss, data, theta, data.labels()))?,
        finite(mean_labeled(loss, data, theta, data.labeled_predictions()))?,
        finite(mean_unlabeled(loss, data, theta))?,
    ))
}

pub fn rectified_objective(loss: &dyn Loss, data: &Dataset, theta: &[f64], lambda: f64) -> Result<f64> {
    check_theta(loss, theta)?;
    let l_n = mean_labeled(loss, data, theta, data.labels());
    if lambda == 0.0 {
        return finite(l_n);
    }
    let lf_n = mean_labeled(loss, data, theta, data.labeled_predictions());
    let lf_big = mean_unlabeled(loss, data, theta);
    finite(l_n + lambda * (lf_big - lf_n))
}

pub fn rectified_gradient(
    loss: &dyn Loss,
    data: &Dataset,
    theta: &[f64],
    lambda: f64,
) -> Result<DVector<f64>> {
    check_theta(loss, theta)?;
    let p = loss.dim();
    let n = data.n();
    let inv_n = 1.0 / n as f64;
    let mut g = DVector::zeros(p);
    let out = g.as_mut_slice();
    let (y, f) = (data.labels(), data.labeled_predictions());
    for (i, &yi) in y.iter().enumerate() {
        loss.add_gradient(theta, data.labeled_x(i), yi, inv_n, out);
    }
    if lambda != 0.0 {
        for (i, &fi) in f.iter().enumerate() {
            loss.add_gradient(theta, data.labeled_x(i), fi, -lambda * inv_n, out);
        }
        let m = data.big_n();
        let ft = data.unlabeled_predictions();
        let w = lambda / m as f64;
        for (i, &fi) in ft.iter().enumerate() {
            loss.add_gradient(theta, data.unlabeled_x(i), fi, w, out);
        }
    }
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(PpiError::NonFiniteLoss)
    }
}

pub fn rectified_hessian(
    loss: &dyn Loss,
    data: &Dataset,
    theta: &[f64],
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_theta(loss, theta)?;
    let p = loss.dim();
    let n = data.n();
    let inv_n = 1.0 / n as f64;
    let mut h = DMatrix::zeros(p, p);
    let (y, f) = (data.labels(), data.labeled_predictions());
    for (i, &yi) in y.iter().enumerate() {
        loss.add_hessian(theta, data.labeled_x(i), yi, inv_n, &mut h);
    }
    if lambda != 0.0 {
        for (i, &fi) in f.iter().enumerate() {
            loss.add_hessian(theta, data.labeled_x(i), fi, -lambda * inv_n, &mut h);
        }
        let m = data.big_n();
        let ft = data.unlabeled_predictions();
        let w = lambda / m as f64;
        for (i, &fi) in ft.iter().enumerate() {
            loss.add_hessian(theta, data.unlabeled_x(i), fi, w, &mut h);
        }
    }
    crate::stats::symmetrize(&mut h);
    if h.iter().all(|v| v.is_finite()) {
        Ok(h)
    } else {
        Err(PpiError::NonFiniteLoss)
    }
}

/// Per-observation gradients at a fixed θ, one row per observation.
#[derive(Debug, Clone)]
pub struct GradientRows {
    /// ∇ℓ_θ(Xᵢ, Yᵢ), n rows
    pub labeled: DMatrix<f64>,
    /// ∇ℓ_θ(Xᵢ, f(Xᵢ)), n rows
    pub labeled_pred: DMatrix<f64>,
    /// ∇ℓ_θ(X̃ᵢ, f(X̃ᵢ)), N rows
    pub unlabeled_pred: DMatrix<f64>,
}

fn rows_of<'a>(
    loss: &dyn Loss,
    theta: &[f64],
    obs: impl Iterator<Item = (&'a [f64], f64)>,
    m: usize,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, loss.dim());
    let mut buf = vec![0.0; loss.dim()];
    for (i, (x, y)) in obs.enumerate() {
        buf.fill(0.0);
        loss.add_gradient(theta, x, y, 1.0, &mut buf);
        for (j, v) in buf.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

impl GradientRows {
    pub fn compute(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> Result<Self> {
        check_theta(loss, theta)?;
        let (n, m) = (data.n(), data.big_n());
        let labeled = |ys: &'_ [f64]| {
            let obs = (0..n).map(|i| (data.labeled_x(i), ys[i]));
            rows_of(loss, theta, obs, n)
        };
        let unlabeled = (0..m).map(|i| (data.unlabeled_x(i), data.unlabeled_predictions()[i]));
        let rows = Self {
            labeled: labeled(data.labels()),
            labeled_pred: labeled(data.labeled_predictions()),
            unlabeled_pred: rows_of(loss, theta, unlabeled, m),
        };
        let all_finite = [&rows.labeled, &rows.labeled_pred, &rows.unlabeled_pred]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()));
        if all_finite {
            Ok(rows)
        } else {
            Err(PpiError::NonFiniteLoss)
        }
    }

    /// Just ∇ℓ_θ(Xᵢ, Yᵢ); prediction fields are not read.
    pub fn labeled_only(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
        check_theta(loss, theta)?;
        let n = data.n();
        let y = data.labels();
        let rows = rows_of(loss, theta, (0..n).map(|i| (data.labeled_x(i), y[i])), n);
        if rows.iter().all(|v| v.is_finite()) {
            Ok(rows)
        } else {
            Err(PpiError::NonFiniteLoss)
        }
    }

    /// Rows ∇ℓ_θ(Xᵢ, Yᵢ) − λ∇ℓ_θ(Xᵢ, f(Xᵢ)).
    pub fn delta(&self, lambda: f64) -> DMatrix<f64> {
        &self.labeled - &self.labeled_pred * lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Features;
    use crate::losses::{make_glm, make_mean_loss, GlmFamily, MeanLoss};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn hand_data() -> Dataset {
        Dataset::without_features(vec![1.0, 2.0, 3.0], vec![2.0, 2.0, 2.0], vec![4.0, 4.0]).unwrap()
    }

    fn random_glm_data(rng: &mut ChaCha8Rng, family: GlmFamily, n: usize, m: usize, d: usize) -> Dataset {
        let mut draw = |rows: usize| -> (Features, Vec<f64>, Vec<f64>) {
            let x: Vec<f64> = (0..rows * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let label = |r: &mut ChaCha8Rng| match family {
                GlmFamily::Linear => r.sample::<f64, _>(StandardNormal),
                GlmFamily::Logistic => f64::from(r.random_bool(0.4)),
                GlmFamily::Poisson => r.random_range(0..4) as f64,
            };
            let y: Vec<f64> = (0..rows).map(|_| label(rng)).collect();
            let f: Vec<f64> = (0..rows).map(|_| label(rng)).collect();
            (Features::new(rows, d, x).unwrap(), y, f)
        };
        let (xl, y, f) = draw(n);
        let (xu, _, ft) = draw(m);
        Dataset::new(xl, y, f, Some(xu), ft).unwrap()
    }

    #[test]
    fn classical_objective_at_lambda_zero() {
        let data = hand_data();
        let (l_n, _, _) = empirical_losses(&MeanLoss, &data, &[2.0]).unwrap();
        assert_eq!(rectified_objective(&MeanLoss, &data, &[2.0], 0.0).unwrap(), l_n);
    }

    #[test]
    fn perfect_predictions_cancel_at_lambda_one() {
        let data = Dataset::without_features(vec![1.0, 2.0, 5.0], vec![1.0, 2.0, 5.0], vec![0.0, 3.0])
            .unwrap();
        let (_, _, lf_big) = empirical_losses(&MeanLoss, &data, &[1.5]).unwrap();
        let v = rectified_objective(&MeanLoss, &data, &[1.5], 1.0).unwrap();
        assert!((v - lf_big).abs() < 1e-14);
    }

    #[test]
    fn mean_hand_evaluation() {
        let data = hand_data();
        let v = rectified_objective(&make_mean_loss(), &data, &[2.0], 0.5).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-14);
        let g = rectified_gradient(&make_mean_loss(), &data, &[2.0], 0.5).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn wrong_theta_length_is_rejected() {
        let err = rectified_objective(&MeanLoss, &hand_data(), &[1.0, 2.0], 0.5).unwrap_err();
        assert!(matches!(err, PpiError::DimensionMismatch { field: "theta", .. }));
    }

    #[test]
    fn overflow_is_reported() {
        let loss = make_glm(GlmFamily::Poisson, 1);
        let xl = Features::new(2, 1, vec![1.0, 1.0]).unwrap();
        let xu = Features::new(1, 1, vec![1.0]).unwrap();
        let data = Dataset::new(xl, vec![1.0, 2.0], vec![1.0, 2.0], Some(xu), vec![1.0]).unwrap();
        assert_eq!(rectified_objective(&loss, &data, &[1000.0], 0.5), Err(PpiError::NonFiniteLoss));
    }

    #[test]
    fn glm_rectified_hessian_is_psd_on_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in [GlmFamily::Linear, GlmFamily::Logistic, GlmFamily::Poisson] {
            for _ in 0..10 {
                let data = random_glm_data(&mut rng, family, 15, 40, 3);
                let loss = make_glm(family, 3);
                let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                for lambda in [0.0, 0.3, 0.7, 1.0] {
                    let h = rectified_hessian(&loss, &data, &theta, lambda).unwrap();
                    let min = h.symmetric_eigenvalues().min();
                    assert!(min >= -1e-8, "{family:?} λ={lambda} min eig {min}");
                }
            }
        }
    }

    #[test]
    fn prediction_difference_is_unbiased() {
        // f and f̃ drawn from one law: the rectifier (L̃^f_N − L^f_n)(θ) averages to zero
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 400;
        let mut vals = Vec::with_capacity(trials);
        for _ in 0..trials {
            let f: Vec<f64> = (0..30).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let ft: Vec<f64> = (0..60).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let data = Dataset::without_features(f.clone(), f, ft).unwrap();
            let (_, lf_n, lf_big) = empirical_losses(&MeanLoss, &data, &[0.5]).unwrap();
            vals.push(lf_big - lf_n);
        }
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for family in [GlmFamily::Linear, GlmFamily::Logistic, GlmFamily::Poisson] {
            let data = random_glm_data(&mut rng, family, 12, 25, 2);
            let loss = make_glm(family, 2);
            let theta = [0.3, -0.4];
            for lambda in [0.0, 0.6, 1.4] {
                let g = rectified_gradient(&loss, &data, &theta, lambda).unwrap();
                let h = rectified_hessian(&loss, &data, &theta, lambda).unwrap();
                for j in 0..2 {
                    let eps = 1e-5;
                    let mut up = theta;
                    let mut dn = theta;
                    up[j] += eps;
                    dn[j] -= eps;
                    let fd = (rectified_objective(&loss, &data, &up, lambda).unwrap()
                        - rectified_objective(&loss, &data, &dn, lambda).unwrap())
                        / (2.0 * eps);
                    assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0));
                    let gd = (rectified_gradient(&loss, &data, &up, lambda).unwrap()
                        - rectified_gradient(&loss, &data, &dn, lambda).unwrap())
                        / (2.0 * eps);
                    for i in 0..2 {
                        assert!((gd[i] - h[(i, j)]).abs() <= 1e-4 * h[(i, j)].abs().max(1.0));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn objective_is_affine_in_lambda(
            theta in -3.0f64..3.0,
            l1 in -2.0f64..2.0,
            l2 in -2.0f64..2.0,
        ) {
            let data = hand_data();
            let at = |l: f64| rectified_objective(&MeanLoss, &data, &[theta], l).unwrap();
            let (a, b) = (at(0.0), at(1.0));
            for l in [l1, l2] {
                prop_assert!((at(l) - (a + l * (b - a))).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
            }
        }

        #[test]
        fn lambda_zero_ignores_predictions(
            shift in proptest::collection::vec(-100.0f64..100.0, 5),
            theta in -5.0f64..5.0,
        ) {
            let data = hand_data();
            let other = data
                .with_predictions(vec![shift[0], shift[1], shift[2]], vec![shift[3], shift[4]])
                .unwrap();
            let a = rectified_gradient(&MeanLoss, &data, &[theta], 0.0).unwrap();
            let b = rectified_gradient(&MeanLoss, &other, &[theta], 0.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
