use serde::{Deserialize, Serialize};

use super::run::RunResult;
use crate::error::{Error, Result};
use crate::metrics::mean_std;

/// Mean and sample standard deviation of the run metrics over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub n: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub aaa_mean: f64,
    pub aaa_std: f64,
    pub forgetting_mean: f64,
    pub forgetting_std: f64,
    /// Set when `n == 1`; the standard deviations are then reported as 0.
    pub single_sample: bool,
    pub stream_hash: String,
    pub seeds: Vec<u64>,
}

impl Summary {
    /// `mean (±std)` in percent, two decimals.
    pub fn fmt_pct(mean: f64, std: f64) -> String {
        format!("{:.2} (±{:.2})", 100.0 * mean, 100.0 * std)
    }
}

fn seedless(r: &RunResult) -> String {
    let mut c = r.config.clone();
    c.run.seed = 0;
    toml::to_string(&c).expect("config serializes")
}

/// Aggregates runs that differ only in their seed.
pub fn aggregate_seeds(results: &[RunResult]) -> Result<Summary> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidState("no results to aggregate".into()))?;
    let key = seedless(first);
    for r in &results[1..] {
        if seedless(r) != key {
            return Err(Error::InvalidState(format!(
                "cannot aggregate mixed configs: `{}` vs `{}`",
                first.label(),
                r.label()
            )));
        }
        if r.stream_hash != first.stream_hash {
            return Err(Error::InvalidState(
                "cannot aggregate runs on different task streams".into(),
            ));
        }
    }
    let pick = |f: fn(&RunResult) -> f64| results.iter().map(f).collect::<Vec<_>>();
    let (acc_mean, acc_std) = mean_std(&pick(|r| r.acc));
    let (aaa_mean, aaa_std) = mean_std(&pick(|r| r.aaa));
    let (forgetting_mean, forgetting_std) = mean_std(&pick(|r| r.forgetting));
    Ok(Summary {
        label: first.label(),
        n: results.len(),
        acc_mean,
        acc_std,
        aaa_mean,
        aaa_std,
        forgetting_mean,
        forgetting_std,
        single_sample: results.len() == 1,
        stream_hash: first.stream_hash.clone(),
        seeds: results.iter().map(|r| r.seed).collect(),
    })
}
