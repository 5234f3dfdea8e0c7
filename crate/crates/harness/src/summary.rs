//! Coverage and width tables from trial records.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::scenario::ScenarioKind;
use crate::sweep::{Method, TrialRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: &'static str,
    pub method: &'static str,
    pub sigma: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub alpha: f64,
    pub coverage: f64,
    pub mean_width: f64,
    pub width_se: f64,
    /// Successful trials; failed ones are left out of every statistic.
    pub trials: usize,
    pub seed: u64,
}

// sigma and alpha are non-negative, so their bit patterns sort numerically
type Key = (ScenarioKind, Method, usize, u64, usize, u64);

fn key(r: &TrialRecord) -> Key {
    (r.scenario, r.method, r.n, r.sigma.to_bits(), r.big_n, r.alpha.to_bits())
}

/// Rows sorted by (scenario, method, n, σ). `seed` is echoed into every row.
pub fn summarize(records: &[TrialRecord], seed: u64) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<Key, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, method, n, sigma, big_n, alpha), rs)| {
            let mut ok: Vec<&TrialRecord> = rs.into_iter().filter(|r| r.failure.is_none()).collect();
            ok.sort_by(|a, b| (a.trial, a.seed).cmp(&(b.trial, b.seed)).then(a.width.total_cmp(&b.width)));
            let k = ok.len() as f64;
            let coverage = ok.iter().filter(|r| r.covered).count() as f64 / k;
            let mean_width = ok.iter().map(|r| r.width).sum::<f64>() / k;
            let width_se = if ok.len() < 2 {
                0.0
            } else {
                let ss: f64 = ok.iter().map(|r| (r.width - mean_width).powi(2)).sum();
                (ss / (k - 1.0) / k).sqrt()
            };
            SummaryRow {
                scenario: scenario.name(),
                method: method.name(),
                sigma: f64::from_bits(sigma),
                n,
                big_n,
                alpha: f64::from_bits(alpha),
                coverage,
                mean_width,
                width_se,
                trials: ok.len(),
                seed,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv<W: Write>(records: &[TrialRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
