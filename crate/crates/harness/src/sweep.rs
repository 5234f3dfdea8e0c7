//! Monte Carlo sweeps: every method on the same simulated dataset per trial.

use clap::ValueEnum;
use ppi_core::{estimate, EstimateConfig, LambdaPolicy, PpiError};
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{generate_synthetic, ScenarioKind, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    /// λ = 0
    Classical,
    /// λ = 1
    Ppi,
    /// plug-in λ̂ clipped to [0, 1]
    Tuned,
    /// plug-in λ̂ with a single Newton step off the pilot
    OneStep,
    /// λ = 1/(1 + n/N)
    Aipw,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Classical, Method::Ppi, Method::Tuned, Method::OneStep, Method::Aipw];

    pub fn name(self) -> &'static str {
        match self {
            Method::Classical => "classical",
            Method::Ppi => "ppi",
            Method::Tuned => "tuned",
            Method::OneStep => "one_step",
            Method::Aipw => "aipw",
        }
    }

    pub fn policy(self) -> LambdaPolicy {
        match self {
            Method::Classical => LambdaPolicy::Fixed(0.0),
            Method::Ppi => LambdaPolicy::Fixed(1.0),
            Method::Tuned => LambdaPolicy::ClipUnit,
            Method::OneStep => LambdaPolicy::OneStep,
            Method::Aipw => LambdaPolicy::AipwPreset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scenario: ScenarioKind,
    pub sigma: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub alpha: f64,
    pub method: Method,
    pub coord: usize,
    pub trial: usize,
    pub seed: u64,
    pub covered: bool,
    pub width: f64,
    pub lambda_used: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the trial errored; the numeric fields are then NaN/false.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub specs: Vec<ScenarioSpec>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    pub coord: usize,
    /// Thread count; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

/// splitmix64 finalizer applied to (master, trial).
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_trial(spec: &ScenarioSpec, methods: &[Method], coord: usize, trial: usize, seed: u64) -> Vec<TrialRecord> {
    let record = |method: Method| TrialRecord {
        scenario: spec.kind,
        sigma: spec.sigma,
        n: spec.n,
        big_n: spec.big_n,
        alpha: spec.alpha,
        method,
        coord,
        trial,
        seed,
        covered: false,
        width: f64::NAN,
        lambda_used: f64::NAN,
        converged: false,
        iterations: 0,
        failure: None,
    };
    let data = match generate_synthetic(spec, seed) {
        Ok(d) => d,
        Err(e) => {
            return methods
                .iter()
                .map(|&m| TrialRecord { failure: Some(e.to_string()), ..record(m) })
                .collect()
        }
    };
    let loss = spec.loss();
    let target = spec.target(coord);
    methods
        .iter()
        .map(|&m| {
            let mut cfg = EstimateConfig::new(m.policy(), spec.alpha);
            cfg.coord = coord;
            let outcome = estimate(loss.as_ref(), &data, &cfg).and_then(|r| {
                let ci = r.interval().cloned().ok_or_else(|| PpiError::InvalidArgument("no interval".into()))?;
                Ok((r, ci))
            });
            match outcome {
                Ok((r, ci)) => {
                    let diag = r.diagnostics.solver.as_ref().or(r.diagnostics.pilot.as_ref());
                    TrialRecord {
                        covered: ci.contains_value(target),
                        width: ci.width(),
                        lambda_used: r.lambda_used,
                        converged: r.diagnostics.converged,
                        iterations: diag.map_or(0, |d| d.iterations),
                        ..record(m)
                    }
                }
                Err(e) => TrialRecord { failure: Some(e.to_string()), ..record(m) },
            }
        })
        .collect()
}

/// One record per (spec, trial, method), in that nesting order. Trial `t`
/// uses the same seed in every cell.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<TrialRecord>, PpiError> {
    if config.specs.is_empty() || config.methods.is_empty() || config.trials == 0 {
        return Err(PpiError::InvalidArgument("sweep needs at least one spec, method and trial".into()));
    }
    for spec in &config.specs {
        spec.validate()?;
        if config.coord >= spec.loss().dim() {
            return Err(PpiError::InvalidArgument(format!(
                "coordinate {} out of range for scenario {}",
                config.coord,
                spec.kind.name()
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..config.specs.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let work = || -> Vec<TrialRecord> {
        jobs.par_iter()
            .map(|&(s, t)| {
                run_trial(&config.specs[s], &config.methods, config.coord, t, trial_seed(config.master_seed, t))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| PpiError::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(workers: Option<usize>) -> SweepConfig {
        SweepConfig {
            specs: vec![
                ScenarioSpec::new(ScenarioKind::Mean, 1.0, 50, 200, 0.1, 7),
                ScenarioSpec::new(ScenarioKind::Logistic, 0.1, 80, 200, 0.1, 7),
            ],
            methods: Method::ALL.to_vec(),
            trials: 6,
            master_seed: 7,
            coord: 0,
            workers,
        }
    }

    #[test]
    fn one_record_per_spec_trial_method() {
        let recs = run_sweep(&config(Some(2))).unwrap();
        assert_eq!(recs.len(), 2 * 6 * 5);
        assert_eq!(recs[0].method, Method::Classical);
        assert_eq!(recs[5].trial, 1);
        assert!(recs.iter().all(|r| r.failure.is_some() || r.width >= 0.0));
    }

    #[test]
    fn worker_count_does_not_change_records() {
        let a = run_sweep(&config(Some(1))).unwrap();
        let b = run_sweep(&config(Some(3))).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn classical_and_ppi_use_their_fixed_lambda() {
        let recs = run_sweep(&config(None)).unwrap();
        for r in recs.iter().filter(|r| r.failure.is_none()) {
            match r.method {
                Method::Classical => assert_eq!(r.lambda_used, 0.0),
                Method::Ppi => assert_eq!(r.lambda_used, 1.0),
                Method::Tuned => assert!((0.0..=1.0).contains(&r.lambda_used)),
                _ => {}
            }
        }
    }

    #[test]
    fn seeds_differ_across_trials_and_masters() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
        assert_eq!(trial_seed(5, 3), trial_seed(5, 3));
    }

    #[test]
    fn rejects_empty_and_bad_coordinate() {
        let mut c = config(None);
        c.methods.clear();
        assert!(run_sweep(&c).is_err());
        let mut c = config(None);
        c.coord = 2;
        assert!(run_sweep(&c).is_err());
    }
}
