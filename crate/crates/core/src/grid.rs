//! Test-inversion confidence sets on a grid over θ (d ≤ 2).
//!
//! T is the Wald statistic √n·Σ̂^{−1/2}(θ̂ − θ) around the λ = 1 estimate; U is
//! the score statistic √n·(V̂_Δ(θ) + (n/N)·V̂_f(θ))^{−1/2}·∇L^PP_1(θ), recomputed
//! at every grid point.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{PpiError, Result};
use crate::inference::{assemble_sigma, ci_coordinate, covariance_parts, ConfidenceSet, GridSet};
use crate::losses::{rectified_gradient, GradientRows, Loss};
use crate::solver::{minimize_rectified, SolverOptions};
use crate::stats::{chi2_quantile, empirical_covariance, inv_sqrt_psd};

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_HALF_WIDTH_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridStatistic {
    T,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.count {
            self.hi
        } else {
            self.lo + k as f64 * self.spacing()
        }
    }
}

/// Regular grid, row-major over axes (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(PpiError::InvalidArgument(format!(
                "grids support 1 or 2 dimensions, got {}",
                axes.len()
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            if !(a.lo < a.hi) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(PpiError::InvalidArgument(format!("axis {k}: need lo < hi, got [{}, {}]", a.lo, a.hi)));
            }
            if a.count < 3 {
                return Err(PpiError::InvalidArgument(format!("axis {k}: need at least 3 points, got {}", a.count)));
            }
        }
        Ok(Self { axes })
    }

    /// `center ± half_width` per axis with `count` points each.
    pub fn centered(center: &[f64], half_width: &[f64], count: usize) -> Result<Self> {
        let axes = center
            .iter()
            .zip(half_width)
            .map(|(&c, &h)| Axis { lo: c - h, hi: c + h, count })
            .collect();
        Self::new(axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::spacing).collect()
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % a.count;
            flat /= a.count;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&k, a)| a.point(k)).collect()
    }

    fn on_edge(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().zip(&self.axes).any(|(&k, a)| k == 0 || k + 1 == a.count)
    }
}

/// √n·Σ̂^{−1/2}(θ̂ − θ).
pub fn t_statistic(theta_hat: &[f64], sigma: &DMatrix<f64>, n: usize, theta: &[f64]) -> Result<DVector<f64>> {
    let root = inv_sqrt_psd(sigma, "sigma_hat")?;
    Ok(t_with_root(theta_hat, &root, n, theta))
}

fn t_with_root(theta_hat: &[f64], root: &DMatrix<f64>, n: usize, theta: &[f64]) -> DVector<f64> {
    let diff = DVector::from_iterator(theta.len(), theta_hat.iter().zip(theta).map(|(a, b)| a - b));
    root * diff * (n as f64).sqrt()
}

/// √n·(V̂_Δ(θ) + (n/N)·V̂_f(θ))^{−1/2}·∇L^PP_1(θ), with V̂_Δ(θ) = Cov_n(∇ℓ − ∇ℓ^f)
/// and V̂_f(θ) the covariance of ∇ℓ^f over the unlabeled sample alone.
pub fn u_statistic(loss: &dyn Loss, data: &Dataset, theta: &[f64]) -> Result<DVector<f64>> {
    let rows = GradientRows::compute(loss, data, theta)?;
    let v_delta = empirical_covariance(&rows.delta(1.0))?;
    let v_f = empirical_covariance(&rows.unlabeled_pred)?;
    let combined = v_delta + v_f * data.ratio().value();
    let root = inv_sqrt_psd(&combined, "score variance")?;
    let grad = rectified_gradient(loss, data, theta, 1.0)?;
    Ok(root * grad * (data.n() as f64).sqrt())
}

/// The λ = 1 point estimate and its sandwich covariance, which the T statistic
/// and the default grid are built around.
#[derive(Debug, Clone)]
pub struct GridCenter {
    pub theta: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

pub fn grid_center(loss: &dyn Loss, data: &Dataset, opts: &SolverOptions) -> Result<GridCenter> {
    let sol = minimize_rectified(loss, data, 1.0, opts)?;
    let sigma = assemble_sigma(&covariance_parts(loss, data, sol.theta.as_slice(), 1.0)?)?;
    Ok(GridCenter { theta: sol.theta, sigma })
}

/// Centered at the λ = 1 estimate, half-width five classical (λ = 0) interval
/// half-widths per coordinate, 2001 points per axis.
pub fn default_grid(
    loss: &dyn Loss,
    data: &Dataset,
    alpha: f64,
    center: &GridCenter,
    opts: &SolverOptions,
) -> Result<GridSpec> {
    let classical = minimize_rectified(loss, data, 0.0, opts)?;
    let sigma0 = assemble_sigma(&covariance_parts(loss, data, classical.theta.as_slice(), 0.0)?)?;
    let half = (0..loss.dim())
        .map(|j| {
            let iv = ci_coordinate(classical.theta.as_slice(), &sigma0, data.n(), alpha, j)?;
            let w = iv.as_interval().map(|i| i.width() / 2.0).unwrap_or(0.0);
            Ok(DEFAULT_HALF_WIDTH_FACTOR * w)
        })
        .collect::<Result<Vec<_>>>()?;
    GridSpec::centered(center.theta.as_slice(), &half, DEFAULT_GRID_POINTS)
}

/// {θ on the grid : ‖stat(θ)‖² ≤ χ²_{d,1−α}}. An empty result is returned as
/// an empty set, not an error.
pub fn grid_confidence_set(
    loss: &dyn Loss,
    data: &Dataset,
    alpha: f64,
    grid: &GridSpec,
    statistic: GridStatistic,
    center: &GridCenter,
) -> Result<ConfidenceSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PpiError::InvalidProbability(alpha));
    }
    let d = loss.dim();
    if grid.dim() != d {
        return Err(PpiError::DimensionMismatch { field: "grid", expected: d, found: grid.dim() });
    }
    let threshold = chi2_quantile(d, 1.0 - alpha)?;
    let n = data.n();
    let t_root = match statistic {
        GridStatistic::T => Some(inv_sqrt_psd(&center.sigma, "sigma_hat")?),
        GridStatistic::U => None,
    };
    let accepted: Vec<bool> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let theta = grid.point(flat);
            let stat = match &t_root {
                Some(root) => t_with_root(center.theta.as_slice(), root, n, &theta),
                None => u_statistic(loss, data, &theta)?,
            };
            Ok(stat.norm_squared() <= threshold)
        })
        .collect::<Result<_>>()?;
    let cells: Vec<usize> = accepted.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect();
    let grid_set = GridSet {
        statistic,
        points: cells.iter().map(|&c| grid.point(c)).collect(),
        spacing: grid.spacing(),
        touches_boundary: cells.iter().any(|&c| grid.on_edge(c)),
        cells,
    };
    Ok(ConfidenceSet::Grid { level: 1.0 - alpha, grid: grid_set })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Features;
    use crate::losses::{make_glm, make_mean_loss, GlmFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid_of(set: &ConfidenceSet) -> &GridSet {
        match set {
            ConfidenceSet::Grid { grid, .. } => grid,
            _ => unreachable!(),
        }
    }

    fn mean_data(seed: u64, n: usize, m: usize, sigma: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let f: Vec<f64> = y.iter().map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let ft: Vec<f64> = (0..m)
            .map(|_| {
                let v: f64 = rng.sample(StandardNormal);
                v + sigma * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        Dataset::without_features(y, f, ft).unwrap()
    }

    fn logistic_data(seed: u64, n: usize, m: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut side = |rows: usize| {
            let x: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|&v| f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-v).exp())))
                .collect();
            let f: Vec<f64> = y.iter().map(|&v| if rng.random::<f64>() < 0.1 { 1.0 - v } else { v }).collect();
            (Features::new(rows, 1, x).unwrap(), y, f)
        };
        let (xl, y, f) = side(n);
        let (xu, _, ft) = side(m);
        Dataset::new(xl, y, f, Some(xu), ft).unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(vec![]).is_err());
        assert!(GridSpec::new(vec![Axis { lo: 1.0, hi: 0.0, count: 5 }]).is_err());
        assert!(GridSpec::new(vec![Axis { lo: 0.0, hi: 1.0, count: 2 }]).is_err());
        let a = Axis { lo: 0.0, hi: 1.0, count: 3 };
        assert!(GridSpec::new(vec![a; 3]).is_err());
        let g = GridSpec::new(vec![a, Axis { lo: -1.0, hi: 1.0, count: 5 }]).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.point(0), vec![0.0, -1.0]);
        assert_eq!(g.point(6), vec![0.5, -0.5]);
        assert_eq!(g.point(14), vec![1.0, 1.0]);
        assert!(g.on_edge(5) && !g.on_edge(7));
    }

    #[test]
    fn t_statistic_hand_values() {
        let s = DMatrix::identity(2, 2);
        assert_eq!(t_statistic(&[1.0, 2.0], &s, 4, &[1.0, 2.0]).unwrap(), DVector::zeros(2));
        let t = t_statistic(&[1.0, 0.0], &s, 4, &[0.0, 0.0]).unwrap();
        assert!((t - DVector::from_vec(vec![2.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn t_statistic_at_interval_endpoint() {
        let s = DMatrix::from_element(1, 1, 3.0);
        let iv = ci_coordinate(&[0.5], &s, 40, 0.1, 0).unwrap();
        let end = iv.as_interval().unwrap().hi;
        let t = t_statistic(&[0.5], &s, 40, &[end]).unwrap();
        assert!((t.norm_squared() - chi2_quantile(1, 0.9).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn u_statistic_mean_hand_value() {
        // Y − f = (−1, 0, 1) has variance 1 and f̃ is constant, so U(θ) = √3·(θ − 4)
        let data = Dataset::without_features(vec![1.0, 2.0, 3.0], vec![2.0, 2.0, 2.0], vec![4.0, 4.0]).unwrap();
        for theta in [-1.0, 4.0, 5.0, 7.5] {
            let u = u_statistic(&make_mean_loss(), &data, &[theta]).unwrap();
            assert!((u[0] - 3f64.sqrt() * (theta - 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn u_statistic_vanishes_at_the_estimate() {
        let data = mean_data(1, 50, 200, 0.5);
        let c = grid_center(&make_mean_loss(), &data, &SolverOptions::default()).unwrap();
        assert!(u_statistic(&make_mean_loss(), &data, c.theta.as_slice()).unwrap().amax() < 1e-8);
    }

    #[test]
    fn degenerate_score_variance_is_reported() {
        let data = Dataset::without_features(vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]).unwrap();
        assert!(matches!(
            u_statistic(&make_mean_loss(), &data, &[0.0]),
            Err(PpiError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn t_set_matches_the_interval() {
        let data = mean_data(2, 200, 1000, 1.0);
        let loss = make_mean_loss();
        let opts = SolverOptions::default();
        let c = grid_center(&loss, &data, &opts).unwrap();
        let grid = default_grid(&loss, &data, 0.1, &c, &opts).unwrap();
        let set = grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::T, &c).unwrap();
        let iv = ci_coordinate(c.theta.as_slice(), &c.sigma, data.n(), 0.1, 0).unwrap();
        let iv = iv.as_interval().unwrap().clone();
        let inside: Vec<usize> = (0..grid.len()).filter(|&k| iv.contains_value(grid.point(k)[0])).collect();
        assert_eq!(grid_of(&set).cells, inside);
        assert!(!grid_of(&set).touches_boundary);
    }

    #[test]
    fn nearest_point_to_the_estimate_is_accepted() {
        let data = logistic_data(3, 150, 600);
        let loss = make_glm(GlmFamily::Logistic, 1);
        let opts = SolverOptions::default();
        let c = grid_center(&loss, &data, &opts).unwrap();
        let grid = GridSpec::centered(&[c.theta[0] + 0.0123], &[0.8], 201).unwrap();
        let nearest = (0..grid.len())
            .min_by(|&a, &b| {
                let da = (grid.point(a)[0] - c.theta[0]).abs();
                let db = (grid.point(b)[0] - c.theta[0]).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        for stat in [GridStatistic::T, GridStatistic::U] {
            let set = grid_confidence_set(&loss, &data, 0.1, &grid, stat, &c).unwrap();
            assert!(grid_of(&set).cells.contains(&nearest), "{stat:?}");
        }
    }

    fn assert_star_shaped(cells: &[usize], center: usize) {
        if let (Some(&lo), Some(&hi)) = (cells.first(), cells.last()) {
            assert!(lo <= center && center <= hi);
            assert_eq!(cells.len(), hi - lo + 1, "accepted cells are not contiguous");
        }
    }

    #[test]
    fn sets_are_star_shaped_in_one_dimension() {
        let opts = SolverOptions::default();
        for seed in 0..4 {
            let mean = mean_data(10 + seed, 80, 400, 1.0);
            let logit = logistic_data(20 + seed, 120, 500);
            let mean_loss = make_mean_loss();
            let logit_loss = make_glm(GlmFamily::Logistic, 1);
            let cases: [(&dyn Loss, &Dataset); 2] = [(&mean_loss, &mean), (&logit_loss, &logit)];
            for (loss, data) in cases {
                let c = grid_center(loss, data, &opts).unwrap();
                let grid = GridSpec::new(vec![Axis { lo: c.theta[0] - 1.0, hi: c.theta[0] + 1.0, count: 401 }]).unwrap();
                for stat in [GridStatistic::T, GridStatistic::U] {
                    let set = grid_confidence_set(loss, data, 0.1, &grid, stat, &c).unwrap();
                    assert_star_shaped(&grid_of(&set).cells, 200);
                }
            }
        }
    }

    #[test]
    fn sets_shrink_as_alpha_grows() {
        let data = logistic_data(5, 100, 400);
        let loss = make_glm(GlmFamily::Logistic, 1);
        let opts = SolverOptions::default();
        let c = grid_center(&loss, &data, &opts).unwrap();
        let grid = GridSpec::centered(c.theta.as_slice(), &[1.5], 301).unwrap();
        for stat in [GridStatistic::T, GridStatistic::U] {
            let mut previous: Option<Vec<usize>> = None;
            for alpha in [0.01, 0.05, 0.1, 0.3, 0.6] {
                let set = grid_confidence_set(&loss, &data, alpha, &grid, stat, &c).unwrap();
                let cells = grid_of(&set).cells.clone();
                if let Some(prev) = &previous {
                    assert!(cells.iter().all(|c| prev.contains(c)));
                }
                previous = Some(cells);
            }
        }
    }

    #[test]
    fn narrow_grid_touches_the_boundary() {
        let data = mean_data(6, 100, 300, 1.0);
        let loss = make_mean_loss();
        let c = grid_center(&loss, &data, &SolverOptions::default()).unwrap();
        let grid = GridSpec::centered(c.theta.as_slice(), &[1e-3], 11).unwrap();
        let set = grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::U, &c).unwrap();
        assert!(grid_of(&set).touches_boundary);
    }

    #[test]
    fn far_grid_gives_an_empty_set() {
        let data = mean_data(7, 100, 300, 1.0);
        let loss = make_mean_loss();
        let c = grid_center(&loss, &data, &SolverOptions::default()).unwrap();
        let grid = GridSpec::centered(&[c.theta[0] + 50.0], &[1.0], 21).unwrap();
        let set = grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::T, &c).unwrap();
        assert!(grid_of(&set).is_empty());
        assert!(!set.contains(c.theta.as_slice()));
    }

    #[test]
    fn two_dimensional_sets_contain_the_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut side = |rows: usize| {
            let x: Vec<f64> = (0..rows * 2).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..rows).map(|i| x[2 * i] - x[2 * i + 1] + rng.sample::<f64, _>(StandardNormal)).collect();
            let f: Vec<f64> = y.iter().map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
            (Features::new(rows, 2, x).unwrap(), y, f)
        };
        let (xl, y, f) = side(100);
        let (xu, _, ft) = side(400);
        let data = Dataset::new(xl, y, f, Some(xu), ft).unwrap();
        let loss = make_glm(GlmFamily::Linear, 2);
        let opts = SolverOptions::default();
        let c = grid_center(&loss, &data, &opts).unwrap();
        let grid = GridSpec::centered(c.theta.as_slice(), &[0.6, 0.6], 41).unwrap();
        let t = grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::T, &c).unwrap();
        let u = grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::U, &c).unwrap();
        assert!(t.contains(c.theta.as_slice()) && u.contains(c.theta.as_slice()));
        let diff = grid_of(&t).symmetric_difference_measure(grid_of(&u)).unwrap();
        assert!(diff <= 0.5 * grid_of(&t).measure());
    }

    #[test]
    fn parallel_evaluation_is_order_independent() {
        let data = logistic_data(9, 80, 200);
        let loss = make_glm(GlmFamily::Logistic, 1);
        let c = grid_center(&loss, &data, &SolverOptions::default()).unwrap();
        let grid = GridSpec::centered(c.theta.as_slice(), &[1.0], 501).unwrap();
        let a = grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::U, &c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| grid_confidence_set(&loss, &data, 0.1, &grid, GridStatistic::U, &c).unwrap());
        assert_eq!(a, b);
    }
}
