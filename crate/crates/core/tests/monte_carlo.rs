//! Fixed-seed Monte Carlo checks of coverage and efficiency. Bands are 3
//! binomial (or paired) standard errors wide.

mod common;

use ppi_core::grid::u_statistic;
use ppi_core::losses::make_mean_loss;
use ppi_core::stats::chi2_quantile;
use ppi_core::tuning::lambda_plugin_mean;
use ppi_core::{estimate, Dataset, EstimateConfig, LambdaPolicy};
use rand::SeedableRng;

const TRIALS: usize = 400;

fn coverage_band() -> (f64, f64) {
    let se = (0.9 * 0.1 / TRIALS as f64).sqrt();
    (0.9 - 3.0 * se, 0.9 + 3.0 * se)
}

fn trial_data(seed: u64, sigma: f64, sign: f64) -> Dataset {
    common::mean_data(&mut common::rng(seed), 500, 10_000, sigma, sign)
}

#[test]
fn interval_coverage_for_fixed_and_tuned_lambda() {
    let (lo, hi) = coverage_band();
    for policy in [LambdaPolicy::Fixed(0.0), LambdaPolicy::Fixed(1.0), LambdaPolicy::ClipUnit] {
        let cfg = EstimateConfig::new(policy, 0.1);
        let covered = (0..TRIALS as u64)
            .filter(|&t| {
                let r = estimate(&make_mean_loss(), &trial_data(1000 + t, 1.0, 1.0), &cfg).unwrap();
                r.interval().unwrap().contains_value(0.0)
            })
            .count();
        let rate = covered as f64 / TRIALS as f64;
        assert!(lo <= rate && rate <= hi, "{policy:?}: coverage {rate}");
    }
}

#[test]
fn score_statistic_coverage() {
    let (lo, hi) = coverage_band();
    let threshold = chi2_quantile(1, 0.9).unwrap();
    let covered = (0..TRIALS as u64)
        .filter(|&t| {
            let u = u_statistic(&make_mean_loss(), &trial_data(5000 + t, 1.0, 1.0), &[0.0]).unwrap();
            u.norm_squared() <= threshold
        })
        .count();
    let rate = covered as f64 / TRIALS as f64;
    assert!(lo <= rate && rate <= hi, "coverage {rate}");
}

#[test]
fn one_step_beats_clipping_on_anticorrelated_predictions() {
    let one_step = EstimateConfig::new(LambdaPolicy::OneStep, 0.1);
    let clipped = EstimateConfig::new(LambdaPolicy::ClipUnit, 0.1);
    // paired differences of squared error around θ* = 0
    let diffs: Vec<f64> = (0..TRIALS as u64)
        .map(|t| {
            let data = trial_data(9000 + t, 0.5, -1.0);
            let a = estimate(&make_mean_loss(), &data, &clipped).unwrap().theta[0];
            let b = estimate(&make_mean_loss(), &data, &one_step).unwrap().theta[0];
            a * a - b * b
        })
        .collect();
    let m = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / m;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!(mean > 3.0 * sd / m.sqrt(), "mean {mean}, se {}", sd / m.sqrt());
}

#[test]
fn plugin_lambda_is_consistent() {
    // (Y, f) jointly Gaussian with Var = 1 and Cov(Y, f) = 0.6
    let (n, big_n, rho) = (10_000usize, 100_000usize, 0.6f64);
    let r = n as f64 / big_n as f64;
    let target = rho / (1.0 + r);
    let seeds = 50;
    let total: f64 = (0..seeds)
        .map(|s| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77_000 + s);
            let mut pair = |rows: usize| {
                let mut y = Vec::with_capacity(rows);
                let mut f = Vec::with_capacity(rows);
                for _ in 0..rows {
                    let a = common::gauss(&mut rng);
                    let b = common::gauss(&mut rng);
                    y.push(a);
                    f.push(rho * a + (1.0 - rho * rho).sqrt() * b);
                }
                (y, f)
            };
            let (y, f) = pair(n);
            let (_, ft) = pair(big_n);
            let data = Dataset::without_features(y, f, ft).unwrap();
            lambda_plugin_mean(&data).unwrap().lambda_raw
        })
        .sum();
    let mean = total / seeds as f64;
    assert!((mean - target).abs() < 0.05, "mean λ̂ {mean}, target {target}");
}
