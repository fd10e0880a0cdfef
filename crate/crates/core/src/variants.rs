//! Full task-sequence runners for PLAN and its baselines / ablations.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AccuracyMatrix;
use crate::nn::{cross_entropy, AdamConfig, LoraPair, Mlp};
use crate::plan::{
    train_task, BasisKind, BasisRegistry, LayerPlan, LossScope, PerturbSettings, PerturbationTracker, PlanConfig,
    TaskOptimizer, TaskSummary, Trainer, UpdateRule,
};
use crate::tasks::TaskStream;
use crate::tensor::{Matrix, Rng};

/// Standard deviation of Inc-LoRA's Gaussian `A_t` initialization.
pub const INC_LORA_A_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Frequency-based selection + perturbed `B_t` updates.
    Plan,
    /// One unconstrained LoRA per task, `A_t` and `B_t` both trained.
    IncLora,
    /// PLAN with `A_{t+1}` drawn uniformly from the free pool.
    PlanNoSelection,
    /// PLAN selection, but `B_t` follows the unperturbed gradient.
    PlanNoPerturbation,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Plan,
        Method::IncLora,
        Method::PlanNoSelection,
        Method::PlanNoPerturbation,
    ];

    pub fn uses_registry(self) -> bool {
        self != Method::IncLora
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Plan => "plan",
            Method::IncLora => "inc_lora",
            Method::PlanNoSelection => "plan_no_selection",
            Method::PlanNoPerturbation => "plan_no_perturbation",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL.into_iter().find(|m| m.to_string() == s).ok_or_else(|| {
            format!("unknown method `{s}` (expected plan, inc_lora, plan_no_selection or plan_no_perturbation)")
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    /// Ignored by Inc-LoRA, whose `A_t` is trained freely.
    pub basis_kind: BasisKind,
}

impl MethodSpec {
    pub fn plan() -> Self {
        MethodSpec {
            method: Method::Plan,
            basis_kind: BasisKind::Standard,
        }
    }

    pub fn with_method(self, method: Method) -> Self {
        MethodSpec { method, ..self }
    }
}

/// Everything a finished task sequence produced.
#[derive(Clone, Debug)]
pub struct SequenceOutcome {
    pub accuracy: AccuracyMatrix,
    pub tasks: Vec<TaskSummary>,
    /// `allocations[t][l]`: basis indices given to task `t` in layer `l`
    /// (empty for Inc-LoRA).
    pub allocations: Vec<Vec<Vec<usize>>>,
    pub wall_clock_secs: Vec<f64>,
    pub model: Mlp,
    pub registries: Vec<BasisRegistry>,
}

/// Accuracy on each seen task's test split, classifying over all seen classes.
pub fn evaluate_seen(model: &Mlp, stream: &TaskStream, through: usize) -> Result<Vec<f64>> {
    stream.tasks[..=through]
        .iter()
        .map(|t| model.accuracy(&t.test.x, &t.test.y))
        .collect()
}

/// Mean cross-entropy of `model` on a split.
pub fn split_loss(model: &Mlp, x: &Matrix, y: &[usize]) -> Result<f64> {
    let (logits, _) = model.forward(x, None)?;
    Ok(cross_entropy(&logits, y)?.0)
}

fn build_registries(model: &mut Mlp, spec: &MethodSpec, stream: &TaskStream, rng: &Rng) -> Result<Vec<BasisRegistry>> {
    let dims: Vec<usize> = model.layers().iter().map(|l| l.in_dim()).collect();
    match spec.basis_kind {
        BasisKind::Standard => Ok(dims.into_iter().map(BasisRegistry::standard).collect()),
        BasisKind::RandomOrthogonal => dims
            .into_iter()
            .enumerate()
            .map(|(l, k)| BasisRegistry::random_orthogonal(k, &mut rng.fork(&format!("basis-{l}"))))
            .collect(),
        BasisKind::GradientSvd => {
            // Full-batch gradient at the pre-trained weights on the first task.
            let first = &stream.tasks[0].train;
            let (logits, cache) = model.forward(&first.x, None)?;
            let (_, dlogits) = cross_entropy(&logits, &first.y)?;
            let grads = model.backward(&cache, &dlogits)?;
            grads.weights.iter().map(BasisRegistry::gradient_svd).collect()
        }
    }
}

/// Trains `model` on every task of `stream` in order with the given method.
///
/// `model` must carry pre-trained (or random) base weights and an empty head.
pub fn run_sequence(
    mut model: Mlp,
    stream: &TaskStream,
    spec: &MethodSpec,
    cfg: &PlanConfig,
    rng: &Rng,
) -> Result<SequenceOutcome> {
    if model.num_classes() != 0 {
        return Err(Error::InvalidState("run_sequence expects an empty head".into()));
    }
    if model.input_dim() != stream.dim {
        return Err(Error::Shape {
            op: "model/stream",
            lhs: (model.input_dim(), 0),
            rhs: (stream.dim, 0),
        });
    }
    let n_tasks = stream.num_tasks();
    let dims: Vec<usize> = model.layers().iter().map(|l| l.in_dim()).collect();
    if spec.method.uses_registry() {
        cfg.validate(n_tasks, &dims)?;
    } else {
        cfg.validate(n_tasks, &[])?;
    }

    let adam = AdamConfig::with_lr(cfg.lr);
    let mut head_rng = rng.fork("head");
    let mut shuffle_rng = rng.fork("shuffle");
    let mut select_rng = rng.fork("selection");
    let mut lora_rng = rng.fork("lora-init");

    let mut plans: Vec<LayerPlan> = Vec::new();
    let mut accuracy = AccuracyMatrix::new();
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut allocations = Vec::with_capacity(n_tasks);
    let mut wall = Vec::with_capacity(n_tasks);

    for (t, task) in stream.tasks.iter().enumerate() {
        let started = Instant::now();
        let rank = cfg.rank_for(t);
        let r_next = cfg.rank_for(t + 1);
        model.grow_head(task.num_classes(), &mut head_rng);

        let mut task_alloc = Vec::new();
        if spec.method.uses_registry() {
            if t == 0 {
                let regs = build_registries(&mut model, spec, stream, rng)?;
                plans = regs
                    .into_iter()
                    .map(|registry| LayerPlan {
                        registry,
                        tracker: PerturbationTracker::new(cfg.window, r_next),
                    })
                    .collect();
            }
            for (l, plan) in plans.iter_mut().enumerate() {
                let idx = if t == 0 {
                    plan.registry.allocate_first(rank)?
                } else if spec.method == Method::PlanNoSelection {
                    let mut pick = select_rng.choose_distinct(plan.registry.available(), rank);
                    if pick.len() < rank {
                        return Err(Error::BasisExhausted {
                            requested: rank,
                            available: pick.len(),
                        });
                    }
                    pick.sort_unstable();
                    plan.registry.allocate(&pick)?;
                    pick
                } else {
                    plan.tracker.select_next(&mut plan.registry, rank)?
                };
                if !cfg.cumulative_frequency {
                    plan.tracker.clear();
                }
                plan.tracker.set_r_next(r_next);
                let a = plan.registry.rows(&idx);
                let b = Matrix::zeros(model.layers()[l].out_dim(), rank);
                model.attach_adapter(l, LoraPair::new(b, a)?)?;
                debug!("task {t} layer {l}: allocated {idx:?}");
                task_alloc.push(idx);
            }
        } else {
            for l in 0..model.layers().len() {
                let layer = &model.layers()[l];
                let a = lora_rng.normal_matrix(rank, layer.in_dim(), INC_LORA_A_STD);
                let b = Matrix::zeros(layer.out_dim(), rank);
                model.attach_adapter(l, LoraPair::new(b, a)?)?;
            }
        }

        let train_a = spec.method == Method::IncLora;
        let mut opt = TaskOptimizer::new(&model, adam, train_a);
        let trainer = if spec.method.uses_registry() {
            Trainer::Plan {
                plans: &mut plans,
                settings: PerturbSettings {
                    rho: cfg.rho,
                    p: cfg.p,
                    rule: if spec.method == Method::PlanNoPerturbation {
                        UpdateRule::Unperturbed
                    } else {
                        UpdateRule::Perturbed
                    },
                },
            }
        } else {
            Trainer::Plain
        };
        let active = (cfg.loss_scope == LossScope::CurrentTask).then(|| task.classes.clone());
        let summary = train_task(
            &mut model,
            &task.train,
            active.as_ref(),
            trainer,
            &mut opt,
            cfg.epochs,
            cfg.batch_size,
            &mut shuffle_rng,
        )?;
        let row = evaluate_seen(&model, stream, t)?;
        debug!("task {t}: losses {:?}, accuracy {row:?}", summary.epoch_losses);
        accuracy.push_row(row)?;
        tasks.push(summary);
        allocations.push(task_alloc);
        wall.push(started.elapsed().as_secs_f64());
    }

    Ok(SequenceOutcome {
        accuracy,
        tasks,
        allocations,
        wall_clock_secs: wall,
        model,
        registries: plans.into_iter().map(|p| p.registry).collect(),
    })
}

pub fn run_plan(
    model: Mlp,
    stream: &TaskStream,
    basis: BasisKind,
    cfg: &PlanConfig,
    rng: &Rng,
) -> Result<SequenceOutcome> {
    run_sequence(
        model,
        stream,
        &MethodSpec {
            method: Method::Plan,
            basis_kind: basis,
        },
        cfg,
        rng,
    )
}

pub fn run_inc_lora(model: Mlp, stream: &TaskStream, cfg: &PlanConfig, rng: &Rng) -> Result<SequenceOutcome> {
    run_sequence(
        model,
        stream,
        &MethodSpec::plan().with_method(Method::IncLora),
        cfg,
        rng,
    )
}

pub fn run_plan_no_selection(model: Mlp, stream: &TaskStream, cfg: &PlanConfig, rng: &Rng) -> Result<SequenceOutcome> {
    run_sequence(
        model,
        stream,
        &MethodSpec::plan().with_method(Method::PlanNoSelection),
        cfg,
        rng,
    )
}

pub fn run_plan_no_perturbation(
    model: Mlp,
    stream: &TaskStream,
    cfg: &PlanConfig,
    rng: &Rng,
) -> Result<SequenceOutcome> {
    run_sequence(
        model,
        stream,
        &MethodSpec::plan().with_method(Method::PlanNoPerturbation),
        cfg,
        rng,
    )
}
