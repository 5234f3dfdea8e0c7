use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{PpiError, Result};

/// Matrices whose |λ|max / |λ|min exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(m.clone())
}

fn rebuild(e: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &e.eigenvectors;
    let d = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|&l| f(l)));
    let mut out = v * DMatrix::from_diagonal(&d) * v.transpose();
    super::covariance::symmetrize(&mut out);
    out
}

/// Condition number of a symmetric matrix from its eigenvalue magnitudes.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let e = m.clone().symmetric_eigenvalues();
    let max = e.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let min = e.iter().fold(f64::INFINITY, |a, &l| a.min(l.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric (possibly indefinite) matrix, refusing ill-conditioned input.
pub fn symmetric_inverse(m: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let e = eigen(m);
    let max = e.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let min = e.eigenvalues.iter().fold(f64::INFINITY, |a, &l| a.min(l.abs()));
    let condition = if min == 0.0 { f64::INFINITY } else { max / min };
    if !condition.is_finite() || condition > MAX_CONDITION || max == 0.0 {
        return Err(PpiError::SingularMatrix { name, condition });
    }
    Ok(rebuild(&e, |l| 1.0 / l))
}

/// Symmetric S with S·M·S = I for symmetric positive definite M.
pub fn inv_sqrt_psd(m: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let e = eigen(m);
    let max = e.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > 1e-12 * max) {
        return Err(PpiError::NotPositiveDefinite(name));
    }
    Ok(rebuild(&e, |l| 1.0 / l.sqrt()))
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}
