use std::collections::HashMap;
use std::sync::RwLock;

use super::special::{gamma_p, gamma_q, ln_gamma, normal_cdf, normal_pdf};
use crate::error::{PpiError, Result};

// Acklam's rational approximation, ~1.15e-9 relative before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn check_probability(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(PpiError::InvalidProbability(q))
    }
}

fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let t = (-2.0 * p.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let t = p - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Φ⁻¹(q) for q in (0, 1).
///
/// Works on the lower half only and reflects, so `z(q) = −z(1 − q)` holds
/// up to the rounding of `1 − q` itself.
pub fn normal_quantile(q: f64) -> Result<f64> {
    check_probability(q)?;
    if q == 0.5 {
        return Ok(0.0);
    }
    let (p, sign) = if q < 0.5 { (q, -1.0) } else { (1.0 - q, 1.0) };
    let mut x = acklam_lower(p);
    // one Halley step against the incomplete-gamma CDF
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    Ok(sign * x.abs())
}

fn chi2_density(dof: f64, x: f64) -> f64 {
    let k = 0.5 * dof;
    ((k - 1.0) * (0.5 * x).ln() - 0.5 * x - ln_gamma(k)).exp() * 0.5
}

/// (q)-quantile of the χ² distribution with `dof` degrees of freedom.
///
/// Wilson–Hilferty start, then bracketed Newton on the regularized
/// incomplete gamma. Upper-tail probabilities are matched through `Q` to
/// avoid cancellation near q = 1.
pub fn chi2_quantile(dof: usize, q: f64) -> Result<f64> {
    if dof == 0 {
        return Err(PpiError::InvalidArgument("chi-square needs dof >= 1".into()));
    }
    check_probability(q)?;
    let k = 0.5 * dof as f64;
    let upper = q > 0.5;
    let target = if upper { 1.0 - q } else { q };
    // residual is increasing in x in both branches
    let residual = |x: f64| {
        if upper {
            target - gamma_q(k, 0.5 * x)
        } else {
            gamma_p(k, 0.5 * x) - target
        }
    };

    let df = dof as f64;
    let z = normal_quantile(q)?;
    let h = 2.0 / (9.0 * df);
    let mut x = df * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x > 0.0) || !x.is_finite() {
        x = df.max(1e-3);
    }

    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..200 {
        let r = residual(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let mut next = x - r / chi2_density(df, x);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) + 1.0 };
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum QuantileKey {
    Normal(u64),
    ChiSquare(usize, u64),
}

/// Memo table for repeated quantile lookups across Monte Carlo trials.
#[derive(Debug, Default)]
pub struct QuantileCache {
    entries: RwLock<HashMap<QuantileKey, f64>>,
}

impl QuantileCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn lookup(&self, key: QuantileKey, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = self.entries.read().expect("quantile cache poisoned").get(&key) {
            return Ok(*v);
        }
        let value = compute()?;
        // concurrent writers compute the same value, so last-write-wins is harmless
        self.entries
            .write()
            .expect("quantile cache poisoned")
            .insert(key, value);
        Ok(value)
    }

    pub fn normal(&self, q: f64) -> Result<f64> {
        self.lookup(QuantileKey::Normal(q.to_bits()), || normal_quantile(q))
    }

    pub fn chi2(&self, dof: usize, q: f64) -> Result<f64> {
        self.lookup(QuantileKey::ChiSquare(dof, q.to_bits()), || chi2_quantile(dof, q))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("quantile cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
