use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_seeds, Summary};
use super::config::ExperimentConfig;
use super::run::{run_jobs, write_new, write_results, RunResult};
use crate::error::{Error, Result};
use crate::plan::{BasisKind, Window};
use crate::tensor::NormOrder;
use crate::variants::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Rho,
    P,
    /// Sliding-window length `S`.
    Window,
    BasisKind,
    Method,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Rho => "rho",
            SweepAxis::P => "p",
            SweepAxis::Window => "S",
            SweepAxis::BasisKind => "basis_kind",
            SweepAxis::Method => "method",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(SweepAxis::Rho),
            "p" => Ok(SweepAxis::P),
            "S" | "s" | "window" => Ok(SweepAxis::Window),
            "basis_kind" => Ok(SweepAxis::BasisKind),
            "method" => Ok(SweepAxis::Method),
            other => Err(Error::config(
                "sweep.axis",
                format!("unknown axis `{other}` (expected rho, p, S, basis_kind or method)"),
            )),
        }
    }
}

/// One parsed axis value.
#[derive(Clone, Debug, PartialEq)]
pub enum AxisValue {
    Rho(f64),
    P(NormOrder),
    Window(Window),
    BasisKind(BasisKind),
    Method(Method),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Rho(v) => write!(f, "{v}"),
            AxisValue::P(v) => write!(f, "{v}"),
            AxisValue::Window(v) => write!(f, "{v}"),
            AxisValue::BasisKind(v) => write!(f, "{v}"),
            AxisValue::Method(v) => write!(f, "{v}"),
        }
    }
}

impl AxisValue {
    pub fn parse(axis: SweepAxis, v: &toml::Value) -> Result<Self> {
        let bad = |msg: String| Error::config("sweep.values", msg);
        let text = match v {
            toml::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        Ok(match axis {
            SweepAxis::Rho => {
                let rho = v
                    .as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .ok_or_else(|| bad(format!("rho value `{text}` is not a number")))?;
                if !(rho.is_finite() && rho >= 0.0) {
                    return Err(bad(format!("rho must be finite and >= 0, got {rho}")));
                }
                AxisValue::Rho(rho)
            }
            SweepAxis::P => AxisValue::P(text.parse().map_err(bad)?),
            SweepAxis::Window => AxisValue::Window(text.parse().map_err(bad)?),
            SweepAxis::BasisKind => AxisValue::BasisKind(text.parse().map_err(bad)?),
            SweepAxis::Method => AxisValue::Method(text.parse().map_err(bad)?),
        })
    }

    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut c = cfg.clone();
        match *self {
            AxisValue::Rho(v) => c.plan.rho = v,
            AxisValue::P(v) => c.plan.p = v,
            AxisValue::Window(v) => c.plan.window = v,
            AxisValue::BasisKind(v) => c.plan.basis_kind = v,
            AxisValue::Method(v) => c.plan.method = v,
        }
        c.sweep = None;
        c
    }
}

/// Parses and de-duplicates (by printed form) the values of an axis.
pub fn parse_axis_values(axis: SweepAxis, values: &[toml::Value]) -> Result<Vec<AxisValue>> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "at least one value is required"));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for v in values {
        let parsed = AxisValue::parse(axis, v)?;
        if seen.insert(parsed.to_string()) {
            out.push(parsed);
        } else {
            warn!("duplicate {axis} value `{parsed}` dropped");
        }
    }
    Ok(out)
}

/// Jaccard index `|a ∩ b| / |a ∪ b|` (1 for two empty sets).
pub fn jaccard(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Task-2 allocation as `(layer, index)` pairs; `None` for shorter streams.
pub fn second_task_set(r: &RunResult) -> Option<BTreeSet<(usize, usize)>> {
    let t = r.allocations.get(1)?;
    Some(
        t.iter()
            .enumerate()
            .flat_map(|(l, idx)| idx.iter().map(move |&i| (l, i)))
            .collect(),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub summary: Summary,
    /// Mean over seeds of the task-2 Jaccard overlap against the reference
    /// window (S axis only).
    pub jaccard_vs_ref: Option<f64>,
    /// Per-seed task-2 selections as `(layer, index)` pairs (S axis only).
    pub selected_sets: Option<Vec<Vec<(usize, usize)>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    /// Reference value for the overlap column (largest `S`).
    pub reference: Option<String>,
    pub rows: Vec<SweepRow>,
}

/// Header of the summary CSV shared by sweeps and ablations.
pub const SUMMARY_CSV_HEADER: &str =
    "axis,value,n,acc_mean,acc_std,aaa_mean,aaa_std,forgetting_mean,forgetting_std,single_sample,stream_hash,jaccard_vs_ref";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SUMMARY_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let s = &row.summary;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.axis,
                row.value,
                s.n,
                s.acc_mean,
                s.acc_std,
                s.aaa_mean,
                s.aaa_std,
                s.forgetting_mean,
                s.forgetting_std,
                s.single_sample,
                s.stream_hash,
                row.jaccard_vs_ref.map(|j| j.to_string()).unwrap_or_default()
            ));
        }
        out
    }

    /// Fixed-width text table with `mean (±std)` cells in percent.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<22} {:>16} {:>16} {:>10}\n",
            self.axis.to_string(),
            "Acc",
            "AAA",
            "overlap"
        );
        for row in &self.rows {
            let s = &row.summary;
            out.push_str(&format!(
                "{:<22} {:>16} {:>16} {:>10}\n",
                row.value,
                Summary::fmt_pct(s.acc_mean, s.acc_std),
                Summary::fmt_pct(s.aaa_mean, s.aaa_std),
                row.jaccard_vs_ref
                    .map(|j| format!("{j:.3}"))
                    .unwrap_or_else(|| "-".into())
            ));
        }
        out
    }
}

fn window_rank(w: &Window) -> usize {
    match w {
        Window::Steps(n) => *n,
        Window::Full => usize::MAX,
    }
}

/// Runs every axis value over the configured seeds on one shared task stream.
/// Returns the report plus all results, grouped by value in input order.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[AxisValue],
    threads: usize,
) -> Result<(SweepReport, Vec<Vec<RunResult>>)> {
    let configs: Vec<ExperimentConfig> = values.iter().map(|v| v.apply(cfg)).collect();
    for c in &configs {
        c.check()?;
    }
    let stream = configs[0].build_stream()?;
    let seeds = cfg.seeds();
    let jobs: Vec<(ExperimentConfig, u64)> = configs
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();
    let flat = run_jobs(&jobs, &stream, threads)?;
    let grouped: Vec<Vec<RunResult>> = flat.chunks(seeds.len()).map(<[RunResult]>::to_vec).collect();

    let reference = (axis == SweepAxis::Window)
        .then(|| {
            values
                .iter()
                .enumerate()
                .filter_map(|(i, v)| match v {
                    AxisValue::Window(w) => Some((window_rank(w), i)),
                    _ => None,
                })
                .max()
                .map(|(_, i)| i)
        })
        .flatten();

    let mut rows = Vec::with_capacity(values.len());
    for (v, runs) in values.iter().zip(&grouped) {
        let mut summary = aggregate_seeds(runs)?;
        summary.label = format!("{axis}={v}");
        let (jaccard_vs_ref, selected_sets) = match reference {
            Some(ri) => {
                let sets: Option<Vec<_>> = runs.iter().map(second_task_set).collect();
                let refs: Option<Vec<_>> = grouped[ri].iter().map(second_task_set).collect();
                match (sets, refs) {
                    (Some(sets), Some(refs)) => {
                        let j = sets.iter().zip(&refs).map(|(a, b)| jaccard(a, b)).sum::<f64>() / sets.len() as f64;
                        info!("S={v}: task-2 overlap with S={} is {j:.3}", values[ri]);
                        (
                            Some(j),
                            Some(sets.into_iter().map(|s| s.into_iter().collect()).collect()),
                        )
                    }
                    _ => {
                        warn!("overlap needs at least two tasks");
                        (None, None)
                    }
                }
            }
            None => (None, None),
        };
        rows.push(SweepRow {
            value: v.to_string(),
            summary,
            jaccard_vs_ref,
            selected_sets,
        });
    }
    let report = SweepReport {
        axis,
        reference: reference.map(|i| values[i].to_string()),
        rows,
    };
    Ok((report, grouped))
}

/// Files written by [`sweep`] and [`ablate`].
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub report: SweepReport,
    pub results: Vec<Vec<RunResult>>,
    pub result_files: Vec<PathBuf>,
    pub summary_csv: PathBuf,
    pub report_json: PathBuf,
}

fn write_sweep(report: SweepReport, results: Vec<Vec<RunResult>>, out: &Path, stem: &str) -> Result<SweepOutput> {
    let flat: Vec<RunResult> = results.iter().flatten().cloned().collect();
    let (result_files, _) = write_results(&flat, out, &format!("{stem}-runs"))?;
    let summary_csv = write_new(out, stem, "csv", &report.to_csv())?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let report_json = write_new(out, stem, "json", &json)?;
    Ok(SweepOutput {
        report,
        results,
        result_files,
        summary_csv,
        report_json,
    })
}

/// Sweeps the axis in the config's `[sweep]` section.
pub fn sweep(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<SweepOutput> {
    let section = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "config has no [sweep] section"))?;
    let axis: SweepAxis = section.axis.parse()?;
    let values = parse_axis_values(axis, &section.values)?;
    let (report, results) = run_sweep(cfg, axis, &values, threads)?;
    write_sweep(report, results, out, &format!("sweep-{axis}"))
}

/// Runs all four methods on the same stream and seeds.
pub fn ablate(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<SweepOutput> {
    let values: Vec<AxisValue> = Method::ALL.into_iter().map(AxisValue::Method).collect();
    let (report, results) = run_sweep(cfg, SweepAxis::Method, &values, threads)?;
    write_sweep(report, results, out, "ablation")
}
