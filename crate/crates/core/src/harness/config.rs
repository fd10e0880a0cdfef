//! Experiment configuration file (TOML, sections `[model]`, `[plan]`,
//! `[tasks]`, `[run]` and an optional `[sweep]`). Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{BasisKind, LossScope, PlanConfig, Window};
use crate::tasks::{
    gen_gaussian_clusters, gen_rotated_features, load_csv_stream, CsvSchema, GaussianParams, TaskStream,
};
use crate::tensor::NormOrder;
use crate::variants::{Method, MethodSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    /// Base weights trained on the stream's base task, then frozen.
    Pretrained,
    /// Frozen He-normal base weights.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Hidden widths between the input and the feature layer.
    pub hidden: Vec<usize>,
    /// Width of the last adapter layer (input of the head).
    pub features: usize,
    pub backbone: Backbone,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: vec![64],
            features: 64,
            backbone: Backbone::Pretrained,
            pretrain_epochs: 10,
            pretrain_lr: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    pub method: Method,
    pub basis_kind: BasisKind,
    pub p: NormOrder,
    pub rho: f64,
    pub rank: usize,
    pub ranks: Option<Vec<usize>>,
    pub window: Window,
    pub cumulative_frequency: bool,
}

impl Default for PlanSection {
    fn default() -> Self {
        let d = PlanConfig::default();
        PlanSection {
            method: Method::Plan,
            basis_kind: BasisKind::Standard,
            p: d.p,
            rho: d.rho,
            rank: d.rank,
            ranks: None,
            window: d.window,
            cumulative_frequency: d.cumulative_frequency,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Gaussian,
    /// Gaussian base stream whose tasks are re-used under rotations.
    Rotated,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TasksSection {
    pub generator: Generator,
    pub n_tasks: usize,
    pub classes_per_task: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub separation: f64,
    pub base_classes: usize,
    pub seed: u64,
    /// Rotation angle per task (radians), `rotated` only.
    pub angles: Vec<f64>,
    /// Data file, `csv` only. Relative paths resolve against the config file.
    pub csv_path: Option<PathBuf>,
    pub csv: Option<CsvSchema>,
}

impl Default for TasksSection {
    fn default() -> Self {
        let g = GaussianParams::default();
        TasksSection {
            generator: Generator::Gaussian,
            n_tasks: g.n_tasks,
            classes_per_task: g.classes_per_task,
            dim: g.dim,
            samples_per_class: g.samples_per_class,
            separation: g.separation,
            base_classes: g.base_classes,
            seed: g.seed,
            angles: Vec::new(),
            csv_path: None,
            csv: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// First seed; runs use `seed, seed + 1, ...`.
    pub seed: u64,
    pub seeds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub loss_scope: LossScope,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = PlanConfig::default();
        RunSection {
            seed: 0,
            seeds: 5,
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            loss_scope: d.loss_scope,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub plan: PlanSection,
    pub tasks: TasksSection,
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn toml_error(e: toml::de::Error) -> Error {
    // toml reports the offending key in its message
    let msg = e.message().to_string();
    let key = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<config>".into());
    Error::config(key, msg)
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(toml_error)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads a config file; relative CSV paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.tasks.csv_path.as_mut() {
            fix(p);
        }
        if let Some(schema) = cfg.tasks.csv.as_mut() {
            if let Some(p) = schema.test_path.as_mut() {
                fix(p);
            }
            if let Some(p) = schema.base_path.as_mut() {
                fix(p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validation that does not need the data.
    pub fn check(&self) -> Result<()> {
        if self.run.seeds == 0 {
            return Err(Error::config("run.seeds", "must be >= 1"));
        }
        if self.model.features == 0 || self.model.hidden.contains(&0) {
            return Err(Error::config("model.hidden", "layer widths must be positive"));
        }
        match self.tasks.generator {
            Generator::Rotated if self.tasks.angles.is_empty() => {
                return Err(Error::config(
                    "tasks.angles",
                    "rotated generator needs at least one angle",
                ));
            }
            Generator::Csv if self.tasks.csv_path.is_none() || self.tasks.csv.is_none() => {
                return Err(Error::config(
                    "tasks.csv_path",
                    "csv generator needs csv_path and [tasks.csv]",
                ));
            }
            _ => {}
        }
        let dims = self.layer_input_dims(self.tasks.dim);
        self.plan_config(self.run.seed).validate(
            self.expected_tasks(),
            if self.plan.method.uses_registry() { &dims } else { &[] },
        )
    }

    fn expected_tasks(&self) -> usize {
        match self.tasks.generator {
            Generator::Gaussian => self.tasks.n_tasks,
            Generator::Rotated => self.tasks.angles.len(),
            Generator::Csv => self.tasks.csv.as_ref().map_or(0, |c| c.task_labels.len()),
        }
    }

    /// `[input, hidden..., features]`.
    pub fn layer_dims(&self, input: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(&self.model.hidden);
        d.push(self.model.features);
        d
    }

    /// Input dimension of every adapter layer (the basis sizes `k`).
    pub fn layer_input_dims(&self, input: usize) -> Vec<usize> {
        let d = self.layer_dims(input);
        d[..d.len() - 1].to_vec()
    }

    pub fn method_spec(&self) -> MethodSpec {
        MethodSpec {
            method: self.plan.method,
            basis_kind: self.plan.basis_kind,
        }
    }

    pub fn plan_config(&self, seed: u64) -> PlanConfig {
        PlanConfig {
            rho: self.plan.rho,
            p: self.plan.p,
            rank: self.plan.rank,
            ranks: self.plan.ranks.clone(),
            window: self.plan.window,
            cumulative_frequency: self.plan.cumulative_frequency,
            loss_scope: self.run.loss_scope,
            lr: self.run.lr,
            epochs: self.run.epochs,
            batch_size: self.run.batch_size,
            seed,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.run.seeds as u64).map(|i| self.run.seed + i).collect()
    }

    pub fn build_stream(&self) -> Result<TaskStream> {
        let t = &self.tasks;
        let gauss = |n_tasks| GaussianParams {
            n_tasks,
            classes_per_task: t.classes_per_task,
            dim: t.dim,
            samples_per_class: t.samples_per_class,
            separation: t.separation,
            base_classes: t.base_classes,
            seed: t.seed,
        };
        let stream = match t.generator {
            Generator::Gaussian => gen_gaussian_clusters(&gauss(t.n_tasks))?,
            Generator::Rotated => {
                let base = gen_gaussian_clusters(&gauss(t.n_tasks))?;
                gen_rotated_features(&base, &t.angles, t.seed)?
            }
            Generator::Csv => {
                let path = t.csv_path.as_ref().expect("checked");
                load_csv_stream(path, t.csv.as_ref().expect("checked"))?
            }
        };
        let dims = self.layer_input_dims(stream.dim);
        if self.plan.method.uses_registry() {
            self.plan_config(self.run.seed).validate(stream.num_tasks(), &dims)?;
        }
        Ok(stream)
    }
}
