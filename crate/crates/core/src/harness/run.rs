use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Backbone, ExperimentConfig};
use crate::error::{Error, Result};
use crate::metrics::{compute_aaa, compute_acc, compute_forgetting, AccuracyMatrix};
use crate::nn::{AdamConfig, Mlp};
use crate::tasks::TaskStream;
use crate::tensor::Rng;
use crate::variants::run_sequence;

/// Version of the result JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Batch size used for backbone pre-training.
pub const PRETRAIN_BATCH: usize = 32;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub pretrain_secs: f64,
    pub per_task_secs: Vec<f64>,
    pub total_secs: f64,
}

/// One finished run. The `config` snapshot has `run.seed` set to this run's
/// seed and `run.seeds = 1`, so loading it back reproduces exactly this run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub stream_hash: String,
    pub accuracy: AccuracyMatrix,
    pub acc: f64,
    pub aaa: f64,
    pub forgetting: f64,
    pub running_acc: Vec<f64>,
    pub running_aaa: Vec<f64>,
    pub pretrain_losses: Vec<f64>,
    /// Mean batch loss per epoch, one list per task.
    pub task_losses: Vec<Vec<f64>>,
    /// `allocations[t][l]`: basis indices owned by task `t` in layer `l`.
    pub allocations: Vec<Vec<Vec<usize>>>,
    pub timing: Timing,
}

impl RunResult {
    /// JSON with the wall-clock fields zeroed, for byte comparisons.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.timing = Timing::default();
        serde_json::to_string_pretty(&c).expect("result serializes") + "\n"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: RunResult = serde_json::from_str(&text).map_err(|e| Error::MalformedResult {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::MalformedResult {
                path: path.to_path_buf(),
                msg: format!("schema_version {} (expected {SCHEMA_VERSION})", r.schema_version),
            });
        }
        if r.accuracy.num_tasks() == 0 {
            return Err(Error::MalformedResult {
                path: path.to_path_buf(),
                msg: "empty accuracy matrix".into(),
            });
        }
        Ok(r)
    }

    /// Short label used in tables and plot legends.
    pub fn label(&self) -> String {
        let p = &self.config.plan;
        format!(
            "{} ({}, p={}, rho={}, S={})",
            p.method, p.basis_kind, p.p, p.rho, p.window
        )
    }

    /// File stem: method, seed and a hash of the canonical content.
    pub fn file_stem(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        format!(
            "{}-{}-seed{}-{}",
            self.config.plan.method,
            self.config.plan.basis_kind,
            self.seed,
            &hex::encode(digest)[..12]
        )
    }
}

/// Returns `dir/stem.ext`, or `dir/stem-N.ext` for the first free `N`.
pub fn unique_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    let first = dir.join(format!("{stem}.{ext}"));
    if !first.exists() {
        return first;
    }
    (1..)
        .map(|n| dir.join(format!("{stem}-{n}.{ext}")))
        .find(|p| !p.exists())
        .expect("unbounded search")
}

/// Writes `contents` to a fresh file in `dir`; existing files are never replaced.
pub fn write_new(dir: &Path, stem: &str, ext: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = unique_path(dir, stem, ext);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Builds the backbone for `seed`: He-normal init, then pre-training on the
/// stream's base task when the config asks for it.
pub fn build_backbone(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> Result<(Mlp, Vec<f64>)> {
    let rng = Rng::new(seed);
    let dims = cfg.layer_dims(stream.dim);
    let mut model = Mlp::new(&dims, &mut rng.fork("backbone"))?;
    let mut losses = Vec::new();
    if cfg.model.backbone == Backbone::Pretrained {
        let base = stream
            .base
            .as_ref()
            .ok_or_else(|| Error::config("model.backbone", "pretrained backbone needs a base task in the stream"))?;
        losses = model.pretrain(
            &base.train.x,
            &base.train.y,
            base.classes,
            cfg.model.pretrain_epochs,
            PRETRAIN_BATCH,
            &AdamConfig::with_lr(cfg.model.pretrain_lr),
            &mut rng.fork("pretrain"),
        )?;
    }
    Ok((model, losses))
}

/// Trains one seed of `cfg` on `stream`.
pub fn run_single(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> Result<RunResult> {
    let started = Instant::now();
    let (model, pretrain_losses) = build_backbone(cfg, stream, seed)?;
    let pretrain_secs = started.elapsed().as_secs_f64();
    let outcome = run_sequence(
        model,
        stream,
        &cfg.method_spec(),
        &cfg.plan_config(seed),
        &Rng::new(seed).fork("sequence"),
    )?;
    let mut snapshot = cfg.clone();
    snapshot.run.seed = seed;
    snapshot.run.seeds = 1;
    snapshot.sweep = None;
    let accuracy = outcome.accuracy;
    Ok(RunResult {
        schema_version: SCHEMA_VERSION,
        config: snapshot,
        seed,
        stream_hash: stream.content_hash(),
        acc: compute_acc(&accuracy)?,
        aaa: compute_aaa(&accuracy)?,
        forgetting: compute_forgetting(&accuracy)?,
        running_acc: accuracy.running_acc(),
        running_aaa: accuracy.running_aaa(),
        accuracy,
        pretrain_losses,
        task_losses: outcome.tasks.into_iter().map(|t| t.epoch_losses).collect(),
        allocations: outcome.allocations,
        timing: Timing {
            pretrain_secs,
            per_task_secs: outcome.wall_clock_secs,
            total_secs: started.elapsed().as_secs_f64(),
        },
    })
}

/// Runs every `(config, seed)` job on up to `jobs` worker threads. Output
/// order matches input order regardless of scheduling.
pub fn run_jobs(jobs: &[(ExperimentConfig, u64)], stream: &TaskStream, threads: usize) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, seed)| {
                let r = run_single(cfg, stream, *seed)?;
                info!(
                    "{} seed {}: Acc {:.4} AAA {:.4}",
                    r.config.plan.method, seed, r.acc, r.aaa
                );
                Ok(r)
            })
            .collect()
    })
}

/// Header of the per-run CSV written next to the result files.
pub const RUNS_CSV_HEADER: &str = "method,basis_kind,p,rho,window,seed,acc,aaa,forgetting,stream_hash,result_file";

pub fn runs_csv(results: &[RunResult], files: &[PathBuf]) -> String {
    let mut out = String::from(RUNS_CSV_HEADER);
    out.push('\n');
    for (r, f) in results.iter().zip(files) {
        let p = &r.config.plan;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.method,
            p.basis_kind,
            p.p,
            p.rho,
            p.window,
            r.seed,
            r.acc,
            r.aaa,
            r.forgetting,
            r.stream_hash,
            f.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        ));
    }
    out
}

/// What [`run_experiment`] produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub results: Vec<RunResult>,
    pub result_files: Vec<PathBuf>,
    pub runs_csv: PathBuf,
}

/// Writes one JSON per result plus a per-run CSV. Returns the JSON paths.
pub fn write_results(results: &[RunResult], out: &Path, csv_stem: &str) -> Result<(Vec<PathBuf>, PathBuf)> {
    let files = results
        .iter()
        .map(|r| write_new(out, &r.file_stem(), "json", &r.to_json()))
        .collect::<Result<Vec<_>>>()?;
    let csv = write_new(out, csv_stem, "csv", &runs_csv(results, &files))?;
    Ok((files, csv))
}

/// Runs all configured seeds and writes the results under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<ExperimentOutput> {
    cfg.check()?;
    let stream = cfg.build_stream()?;
    if cfg.sweep.is_some() {
        warn!("[sweep] section ignored by a plain run");
    }
    let jobs: Vec<_> = cfg.seeds().into_iter().map(|s| (cfg.clone(), s)).collect();
    let results = run_jobs(&jobs, &stream, threads)?;
    let (result_files, runs_csv) = write_results(&results, out, &format!("runs-{}", cfg.plan.method))?;
    Ok(ExperimentOutput {
        results,
        result_files,
        runs_csv,
    })
}
