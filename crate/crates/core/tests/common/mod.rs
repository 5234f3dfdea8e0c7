#![allow(dead_code)]

use ppi_core::{Dataset, Features};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Y ~ N(0, 1), f = sign·Y + σε on both samples.
pub fn mean_data(rng: &mut ChaCha8Rng, n: usize, big_n: usize, sigma: f64, sign: f64) -> Dataset {
    let mut draw = |rows: usize| {
        let y: Vec<f64> = (0..rows).map(|_| gauss(rng)).collect();
        let f: Vec<f64> = y.iter().map(|v| sign * v + sigma * gauss(rng)).collect();
        (y, f)
    };
    let (y, f) = draw(n);
    let (_, ft) = draw(big_n);
    Dataset::without_features(y, f, ft).unwrap()
}

pub fn linear_data(rng: &mut ChaCha8Rng, n: usize, big_n: usize, d: usize) -> Dataset {
    let mut side = |rows: usize| {
        let x: Vec<f64> = (0..rows * d).map(|_| gauss(rng)).collect();
        let y: Vec<f64> = (0..rows).map(|i| x[i * d..(i + 1) * d].iter().sum::<f64>() + gauss(rng)).collect();
        let f: Vec<f64> = y.iter().map(|v| v + 0.5 * gauss(rng) - 0.3).collect();
        (Features::new(rows, d, x).unwrap(), y, f)
    };
    let (xl, y, f) = side(n);
    let (xu, _, ft) = side(big_n);
    Dataset::new(xl, y, f, Some(xu), ft).unwrap()
}

pub fn logistic_data(rng: &mut ChaCha8Rng, n: usize, big_n: usize, d: usize) -> Dataset {
    let mut side = |rows: usize| {
        let x: Vec<f64> = (0..rows * d).map(|_| gauss(rng)).collect();
        let y: Vec<f64> = (0..rows)
            .map(|i| {
                let s = 0.7 * x[i * d..(i + 1) * d].iter().sum::<f64>();
                f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-s).exp()))
            })
            .collect();
        let f: Vec<f64> = y.iter().map(|&v| if rng.random::<f64>() < 0.15 { 1.0 - v } else { v }).collect();
        (Features::new(rows, d, x).unwrap(), y, f)
    };
    let (xl, y, f) = side(n);
    let (xu, _, ft) = side(big_n);
    Dataset::new(xl, y, f, Some(xu), ft).unwrap()
}
