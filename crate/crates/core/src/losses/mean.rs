use nalgebra::DMatrix;

use super::{LambdaRange, Loss};

/// ℓ_θ(y) = (y − θ)², whose minimizer is E[Y]. Convex for every λ.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanLoss;

pub fn make_mean_loss() -> MeanLoss {
    MeanLoss
}

impl Loss for MeanLoss {
    fn name(&self) -> &str {
        "mean"
    }

    fn dim(&self) -> usize {
        1
    }

    fn feature_dim(&self) -> usize {
        0
    }

    fn convexity_range(&self) -> LambdaRange {
        LambdaRange::ALL
    }

    fn value(&self, theta: &[f64], _x: &[f64], y: f64) -> f64 {
        let r = y - theta[0];
        r * r
    }

    fn add_gradient(&self, theta: &[f64], _x: &[f64], y: f64, scale: f64, out: &mut [f64]) {
        out[0] += scale * 2.0 * (theta[0] - y);
    }

    fn add_hessian(&self, _theta: &[f64], _x: &[f64], _y: f64, scale: f64, out: &mut DMatrix<f64>) {
        out[(0, 0)] += 2.0 * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::fd;
    use proptest::prelude::*;

    #[test]
    fn minimum_at_label() {
        assert_eq!(MeanLoss.value(&[4.0], &[], 4.0), 0.0);
        assert_eq!(MeanLoss.gradient(&[4.0], &[], 4.0)[0], 0.0);
    }

    #[test]
    fn hand_values() {
        assert_eq!(MeanLoss.value(&[0.0], &[], 3.0), 9.0);
        assert_eq!(MeanLoss.gradient(&[0.0], &[], 3.0)[0], -6.0);
        assert_eq!(MeanLoss.hessian(&[0.0], &[], 3.0)[(0, 0)], 2.0);
        assert!(MeanLoss.convexity_range().is_unbounded());
    }

    proptest! {
        #[test]
        fn gradient_matches_central_difference(theta in -50.0f64..50.0, y in -50.0f64..50.0) {
            let g = MeanLoss.gradient(&[theta], &[], y);
            let approx = fd::gradient(&MeanLoss, &[theta], &[], y);
            prop_assert!(fd::rel_err_vec(&approx, &g) < 1e-7);
        }
    }
}
