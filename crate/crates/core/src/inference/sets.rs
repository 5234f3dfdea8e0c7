use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PpiError, Result};
use crate::grid::GridStatistic;
use crate::stats::{chi2_quantile, normal_quantile, symmetric_inverse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetShape {
    Interval,
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub coord: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains_value(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rectangle {
    pub sides: Vec<Interval>,
}

/// {θ : (θ − center)ᵀ shape⁻¹ (θ − center) ≤ radius²}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    pub radius_sq: f64,
    #[serde(skip)]
    precision: DMatrix<f64>,
}

impl Ellipse {
    /// (θ − center)ᵀ shape⁻¹ (θ − center).
    pub fn mahalanobis_sq(&self, theta: &[f64]) -> f64 {
        let v = DVector::from_iterator(self.center.len(), theta.iter().zip(&self.center).map(|(a, c)| a - c));
        v.dot(&(&self.precision * &v))
    }
}

/// Accepted grid points; each stands for the cell of width `spacing` around it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSet {
    pub statistic: GridStatistic,
    pub points: Vec<Vec<f64>>,
    pub spacing: Vec<f64>,
    /// An accepted point sits on the grid edge, so the set may be truncated.
    pub touches_boundary: bool,
    /// Flat grid indices of the accepted points, ascending.
    #[serde(skip)]
    pub(crate) cells: Vec<usize>,
}

impl GridSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Volume of the accepted cells.
    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.spacing.iter().product::<f64>()
    }

    /// Volume of the cells accepted by exactly one of two sets on the same grid.
    pub fn symmetric_difference_measure(&self, other: &GridSet) -> Result<f64> {
        if self.spacing != other.spacing {
            return Err(PpiError::InvalidArgument("grid sets were built on different grids".into()));
        }
        let (a, b) = (&self.cells, &other.cells);
        let (mut i, mut j, mut only) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    only += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    only += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        only += (a.len() - i) + (b.len() - j);
        Ok(only as f64 * self.spacing.iter().product::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ConfidenceSet {
    Interval { level: f64, #[serde(flatten)] interval: Interval },
    Rectangle { level: f64, #[serde(flatten)] rectangle: Rectangle },
    Ellipse { level: f64, #[serde(flatten)] ellipse: Ellipse },
    Grid { level: f64, #[serde(flatten)] grid: GridSet },
}

impl ConfidenceSet {
    pub fn level(&self) -> f64 {
        match self {
            ConfidenceSet::Interval { level, .. }
            | ConfidenceSet::Rectangle { level, .. }
            | ConfidenceSet::Ellipse { level, .. }
            | ConfidenceSet::Grid { level, .. } => *level,
        }
    }

    /// Membership of a full parameter vector. An interval only looks at its coordinate.
    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            ConfidenceSet::Interval { interval, .. } => interval.contains_value(theta[interval.coord]),
            ConfidenceSet::Rectangle { rectangle, .. } => {
                rectangle.sides.iter().all(|s| s.contains_value(theta[s.coord]))
            }
            ConfidenceSet::Ellipse { ellipse, .. } => ellipse.mahalanobis_sq(theta) <= ellipse.radius_sq,
            ConfidenceSet::Grid { grid, .. } => grid.points.iter().any(|p| {
                p.iter()
                    .zip(theta)
                    .zip(&grid.spacing)
                    .all(|((a, b), h)| (a - b).abs() <= 0.5 * h)
            }),
        }
    }

    pub fn as_interval(&self) -> Option<&Interval> {
        match self {
            ConfidenceSet::Interval { interval, .. } => Some(interval),
            _ => None,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(PpiError::InvalidProbability(alpha))
    }
}

fn check_shape(theta: &[f64], sigma: &DMatrix<f64>) -> Result<()> {
    let d = theta.len();
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(PpiError::DimensionMismatch { field: "sigma_hat", expected: d, found: sigma.nrows() });
    }
    Ok(())
}

fn interval(theta: &[f64], sigma: &DMatrix<f64>, n: usize, z: f64, j: usize) -> Result<Interval> {
    let var = sigma[(j, j)];
    if !(var >= 0.0) {
        return Err(PpiError::InvalidArgument(format!("sigma_hat[{j}][{j}] = {var} is negative")));
    }
    let half = z * (var / n as f64).sqrt();
    Ok(Interval { coord: j, lo: theta[j] - half, hi: theta[j] + half })
}

/// θ̂_j ± z_{1−α/2}·√(Σ̂_jj / n).
pub fn ci_coordinate(theta: &[f64], sigma: &DMatrix<f64>, n: usize, alpha: f64, j: usize) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_shape(theta, sigma)?;
    if j >= theta.len() {
        return Err(PpiError::InvalidArgument(format!("coordinate {j} out of range for dimension {}", theta.len())));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(ConfidenceSet::Interval { level: 1.0 - alpha, interval: interval(theta, sigma, n, z, j)? })
}

/// Bonferroni box: every coordinate at z_{1−α/(2d)}.
pub fn confidence_rectangle(theta: &[f64], sigma: &DMatrix<f64>, n: usize, alpha: f64) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_shape(theta, sigma)?;
    let d = theta.len();
    let z = normal_quantile(1.0 - alpha / (2.0 * d as f64))?;
    let sides = (0..d).map(|j| interval(theta, sigma, n, z, j)).collect::<Result<_>>()?;
    Ok(ConfidenceSet::Rectangle { level: 1.0 - alpha, rectangle: Rectangle { sides } })
}

/// θ̂ + {v : vᵀ(Σ̂/n)⁻¹v ≤ χ²_{d,1−α}}.
pub fn confidence_ellipse(theta: &[f64], sigma: &DMatrix<f64>, n: usize, alpha: f64) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_shape(theta, sigma)?;
    let shape = sigma / n as f64;
    if shape.clone().symmetric_eigenvalues().min() <= 0.0 {
        return Err(PpiError::NotPositiveDefinite("sigma_hat"));
    }
    let precision = symmetric_inverse(&shape, "sigma_hat")?;
    let d = theta.len();
    let ellipse = Ellipse {
        center: theta.to_vec(),
        shape: shape.row_iter().map(|r| r.iter().copied().collect()).collect(),
        radius_sq: chi2_quantile(d, 1.0 - alpha)?,
        precision,
    };
    Ok(ConfidenceSet::Ellipse { level: 1.0 - alpha, ellipse })
}
