//! Unbiased (m − 1 denominator) empirical covariances over observation rows.
//!
//! Every matrix argument here stores one observation per row.

use nalgebra::{DMatrix, DVector};

use crate::error::{PpiError, Result};

fn column_means(blocks: &[&DMatrix<f64>], p: usize, m: usize) -> DVector<f64> {
    let mut mean = DVector::zeros(p);
    for block in blocks {
        for j in 0..p {
            mean[j] += block.column(j).sum();
        }
    }
    mean / m as f64
}

fn centered(block: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = block.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    out
}

/// Covariance of all rows across several blocks treated as one sample.
pub fn pooled_covariance(blocks: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let p = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    for b in blocks {
        if b.ncols() != p {
            return Err(PpiError::DimensionMismatch {
                field: "covariance rows",
                expected: p,
                found: b.ncols(),
            });
        }
    }
    let m: usize = blocks.iter().map(|b| b.nrows()).sum();
    if m < 2 {
        return Err(PpiError::TooFewObservations {
            field: "covariance rows",
            required: 2,
            found: m,
        });
    }
    let mean = column_means(blocks, p, m);
    let mut acc = DMatrix::zeros(p, p);
    for b in blocks {
        let c = centered(b, &mean);
        acc += c.tr_mul(&c);
    }
    acc /= (m - 1) as f64;
    symmetrize(&mut acc);
    Ok(acc)
}

pub fn empirical_covariance(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pooled_covariance(&[rows])
}

/// Ĉov(A, B) = (1/(m−1)) Σ (aᵢ − ā)(bᵢ − b̄)ᵀ for paired rows.
pub fn empirical_cross_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(PpiError::DimensionMismatch {
            field: "cross-covariance rows",
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let m = a.nrows();
    if m < 2 {
        return Err(PpiError::TooFewObservations {
            field: "cross-covariance rows",
            required: 2,
            found: m,
        });
    }
    let ca = centered(a, &column_means(&[a], a.ncols(), m));
    let cb = centered(b, &column_means(&[b], b.ncols(), m));
    Ok(ca.tr_mul(&cb) / (m - 1) as f64)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
