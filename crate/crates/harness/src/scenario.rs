//! Synthetic data generators with a known target parameter.

use clap::ValueEnum;
use ppi_core::losses::{make_glm, make_mean_loss};
use ppi_core::{Dataset, Features, GlmFamily, Loss, PpiError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Y ~ N(0, 1), f = Y + σε.
    Mean,
    /// Y ~ N(0, 1), f = −Y + σε.
    MeanAnticorrelated,
    /// Y = Xᵀθ + N(0, 1), f = Xᵀθ + N(−2, σ²).
    Linear,
    /// Y ~ Bernoulli(sigmoid(Xᵀθ)), f = Y flipped with probability σ.
    Logistic,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Mean => "mean",
            ScenarioKind::MeanAnticorrelated => "mean_anticorrelated",
            ScenarioKind::Linear => "linear",
            ScenarioKind::Logistic => "logistic",
        }
    }

    pub fn has_features(self) -> bool {
        matches!(self, ScenarioKind::Linear | ScenarioKind::Logistic)
    }

    /// Noise levels used when `--sigma` is not given.
    pub fn default_sigmas(self) -> &'static [f64] {
        match self {
            ScenarioKind::Mean | ScenarioKind::MeanAnticorrelated => &[0.1, 1.0, 2.0],
            ScenarioKind::Linear => &[0.1, 0.5, 1.0],
            ScenarioKind::Logistic => &[0.01, 0.1, 0.2],
        }
    }
}

/// Labeled sizes used when `--n` is not given.
pub const DEFAULT_NS: &[usize] = &[100, 200, 500, 1000, 2000];
pub const DEFAULT_BIG_N: usize = 10_000;
pub const DEFAULT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Feature dimension; ignored by the mean scenarios.
    pub d: usize,
    pub sigma: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub alpha: f64,
    /// Regression coefficients; the mean scenarios always target 0.
    pub theta_true: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// θ_true defaults to the all-ones vector.
    pub fn new(kind: ScenarioKind, sigma: f64, n: usize, big_n: usize, alpha: f64, seed: u64) -> Self {
        let d = if kind.has_features() { DEFAULT_DIM } else { 1 };
        Self { kind, d, sigma, n, big_n, alpha, theta_true: vec![1.0; d], seed }
    }

    pub fn with_dim(mut self, d: usize) -> Self {
        if self.kind.has_features() {
            self.d = d;
            self.theta_true = vec![1.0; d];
        }
        self
    }

    pub fn validate(&self) -> Result<(), PpiError> {
        let bad = |msg: String| Err(PpiError::InvalidArgument(msg));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.kind == ScenarioKind::Logistic && self.sigma > 1.0 {
            return bad(format!("logistic sigma is a flip probability, got {}", self.sigma));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PpiError::InvalidProbability(self.alpha));
        }
        if self.n < 2 || self.big_n < 2 {
            return bad(format!("need n >= 2 and N >= 2, got n={} N={}", self.n, self.big_n));
        }
        if self.kind.has_features() && (self.d == 0 || self.theta_true.len() != self.d) {
            return bad(format!("theta_true must have length d={}", self.d));
        }
        Ok(())
    }

    pub fn loss(&self) -> Box<dyn Loss> {
        match self.kind {
            ScenarioKind::Mean | ScenarioKind::MeanAnticorrelated => Box::new(make_mean_loss()),
            ScenarioKind::Linear => Box::new(make_glm(GlmFamily::Linear, self.d)),
            ScenarioKind::Logistic => Box::new(make_glm(GlmFamily::Logistic, self.d)),
        }
    }

    /// The estimand's true value at coordinate `j`.
    pub fn target(&self, j: usize) -> f64 {
        match self.kind {
            ScenarioKind::Mean | ScenarioKind::MeanAnticorrelated => 0.0,
            _ => self.theta_true[j],
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct Draw {
    x: Vec<f64>,
    y: Vec<f64>,
    f: Vec<f64>,
}

fn draw(spec: &ScenarioSpec, rows: usize, rng: &mut ChaCha8Rng) -> Draw {
    let d = spec.d;
    let sigma = spec.sigma;
    let mut out = Draw { x: Vec::new(), y: Vec::with_capacity(rows), f: Vec::with_capacity(rows) };
    match spec.kind {
        ScenarioKind::Mean | ScenarioKind::MeanAnticorrelated => {
            let sign = if spec.kind == ScenarioKind::Mean { 1.0 } else { -1.0 };
            for _ in 0..rows {
                let y = gauss(rng);
                out.y.push(y);
                out.f.push(sign * y + sigma * gauss(rng));
            }
        }
        ScenarioKind::Linear | ScenarioKind::Logistic => {
            out.x.reserve(rows * d);
            for _ in 0..rows {
                let start = out.x.len();
                out.x.extend((0..d).map(|_| gauss(rng)));
                let s: f64 = out.x[start..].iter().zip(&spec.theta_true).map(|(a, b)| a * b).sum();
                if spec.kind == ScenarioKind::Linear {
                    out.y.push(s + gauss(rng));
                    out.f.push(s + (-2.0 + sigma * gauss(rng)));
                } else {
                    let y = f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-s).exp()));
                    let flip = rng.random::<f64>() < sigma;
                    out.y.push(y);
                    out.f.push(if flip { 1.0 - y } else { y });
                }
            }
        }
    }
    out
}

/// Deterministic given `seed`. Labeled rows are drawn before unlabeled ones
/// from a single ChaCha8 stream.
pub fn generate_synthetic(spec: &ScenarioSpec, seed: u64) -> Result<Dataset, PpiError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labeled = draw(spec, spec.n, &mut rng);
    let unlabeled = draw(spec, spec.big_n, &mut rng);
    if spec.kind.has_features() {
        Dataset::new(
            Features::new(spec.n, spec.d, labeled.x)?,
            labeled.y,
            labeled.f,
            Some(Features::new(spec.big_n, spec.d, unlabeled.x)?),
            unlabeled.f,
        )
    } else {
        Dataset::without_features(labeled.y, labeled.f, unlabeled.f)
    }
}
