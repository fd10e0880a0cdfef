use serde::{Deserialize, Serialize};

use super::basis::BasisRegistry;
use super::perturb::solve_epsilon;
use super::tracker::PerturbationTracker;
use crate::error::{Error, Result};
use std::ops::Range;

use crate::nn::{adam_step, cross_entropy, cross_entropy_within, AdamConfig, AdamState, Grads, Mlp};
use crate::tasks::Split;
use crate::tensor::{Matrix, NormOrder, Rng};

/// Per-layer allocation state: basis pool plus perturbation statistics.
#[derive(Clone, Debug)]
pub struct LayerPlan {
    pub registry: BasisRegistry,
    pub tracker: PerturbationTracker,
}

/// Which gradient drives the `B_t` update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateRule {
    /// Gradient at `W_t + eps M_t`.
    Perturbed,
    /// Gradient at `W_t`; perturbations are still computed and recorded.
    Unperturbed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbSettings {
    pub rho: f64,
    pub p: NormOrder,
    pub rule: UpdateRule,
}

/// Adam states for everything trainable during one task: each live adapter's
/// `B` (and `A` when `train_a`) and every unfrozen head block.
#[derive(Clone, Debug)]
pub struct TaskOptimizer {
    cfg: AdamConfig,
    train_a: bool,
    b: Vec<Option<AdamState>>,
    a: Vec<Option<AdamState>>,
    head: Vec<Option<(AdamState, AdamState)>>,
}

impl TaskOptimizer {
    pub fn new(model: &Mlp, cfg: AdamConfig, train_a: bool) -> Self {
        let b = model
            .layers()
            .iter()
            .map(|l| l.live().map(|p| AdamState::for_param(&p.b)))
            .collect();
        let a = model
            .layers()
            .iter()
            .map(|l| l.live().filter(|_| train_a).map(|p| AdamState::for_param(&p.a)))
            .collect();
        let head = model
            .head()
            .blocks()
            .iter()
            .map(|blk| (!blk.frozen).then(|| (AdamState::for_param(&blk.weight), AdamState::for_param(&blk.bias))))
            .collect();
        TaskOptimizer {
            cfg,
            train_a,
            b,
            a,
            head,
        }
    }

    /// Applies one Adam step. `weight_grads[l]` is the gradient w.r.t. layer
    /// `l`'s full weight; the adapter gradients are `dW A^T` and `B^T dW`.
    pub fn apply(&mut self, model: &mut Mlp, weight_grads: &[Matrix], head_grads: &[(Matrix, Matrix)]) -> Result<()> {
        for (l, dw) in weight_grads.iter().enumerate() {
            let Some(bstate) = self.b[l].as_mut() else {
                continue;
            };
            let layer = model.layer_mut(l);
            let pair = layer
                .live_mut()
                .ok_or_else(|| Error::InvalidState(format!("layer {l} lost its live adapter")))?;
            let grad_b = dw.matmul_t(&pair.a)?;
            let grad_a = if self.train_a { Some(pair.b.t_matmul(dw)?) } else { None };
            adam_step(&self.cfg, bstate, &mut pair.b, &grad_b);
            if let (Some(ga), Some(astate)) = (grad_a, self.a[l].as_mut()) {
                adam_step(&self.cfg, astate, &mut pair.a, &ga);
            }
        }
        let head = model.head_mut();
        for ((blk, st), (gw, gb)) in head.blocks_mut().iter_mut().zip(&mut self.head).zip(head_grads) {
            if let Some((sw, sb)) = st.as_mut() {
                adam_step(&self.cfg, sw, &mut blk.weight, gw);
                adam_step(&self.cfg, sb, &mut blk.bias, gb);
            }
        }
        Ok(())
    }
}

/// Perturbation for one layer.
#[derive(Clone, Debug)]
pub struct LayerPerturbation {
    /// Closed-form `eps` in basis coordinates (`d x |M_t|`); `None` when the pool is empty.
    pub eps: Option<Matrix>,
    /// `eps M_t` in weight space (`d x k`).
    pub delta: Matrix,
}

/// Computes `eps = solve(grad M_t^T)` and `eps M_t` for every layer.
pub fn compute_perturbations(
    plans: &[LayerPlan],
    weight_grads: &[Matrix],
    rho: f64,
    p: NormOrder,
) -> Result<Vec<LayerPerturbation>> {
    plans
        .iter()
        .zip(weight_grads)
        .map(|(plan, dw)| {
            if plan.registry.available().is_empty() {
                return Ok(LayerPerturbation {
                    eps: None,
                    delta: Matrix::zeros(dw.rows(), dw.cols()),
                });
            }
            let g = plan.registry.gather_gradient(dw)?;
            let eps = solve_epsilon(&g, rho, p);
            let delta = plan.registry.scatter(&eps)?;
            Ok(LayerPerturbation { eps: Some(eps), delta })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// Batch loss at the unperturbed weights.
    pub loss: f64,
    /// Batch loss at the perturbed weights, when that pass ran.
    pub perturbed_loss: Option<f64>,
}

fn loss_and_grads(
    model: &Mlp,
    x: &Matrix,
    y: &[usize],
    deltas: Option<&[Matrix]>,
    active: Option<&Range<usize>>,
) -> Result<(f64, Grads)> {
    let (logits, cache) = model.forward(x, deltas)?;
    let (loss, dlogits) = match active {
        Some(r) => cross_entropy_within(&logits, y, r)?,
        None => cross_entropy(&logits, y)?,
    };
    Ok((loss, model.backward(&cache, &dlogits)?))
}

/// One PLAN step on a mini-batch.
///
/// 1. gradient w.r.t. each layer's `W_t` at the current weights;
/// 2. `g = grad M_t^T`, `eps = solve_epsilon(g)`, `delta = eps M_t`;
/// 3. record the least-perturbed columns of `eps` in each tracker;
/// 4. with [`UpdateRule::Perturbed`], recompute the gradient at `W_t + delta`;
/// 5. Adam on `B_t` with `dW A_t^T`. Head blocks use the unperturbed gradient.
///
/// `active`, when set, restricts the loss to those logit columns.
pub fn perturbed_grad_step(
    model: &mut Mlp,
    x: &Matrix,
    y: &[usize],
    active: Option<&Range<usize>>,
    plans: &mut [LayerPlan],
    opt: &mut TaskOptimizer,
    settings: &PerturbSettings,
) -> Result<StepOutcome> {
    if plans.len() != model.layers().len() {
        return Err(Error::InvalidState(format!(
            "{} layer plans for {} layers",
            plans.len(),
            model.layers().len()
        )));
    }
    if model.layers().iter().all(|l| l.live().is_none()) {
        return Err(Error::InvalidState("perturbed step needs a live adapter".into()));
    }
    let (loss, grads) = loss_and_grads(model, x, y, None, active)?;
    let perturbations = compute_perturbations(plans, &grads.weights, settings.rho, settings.p)?;
    for (plan, pert) in plans.iter_mut().zip(&perturbations) {
        if let Some(eps) = &pert.eps {
            plan.tracker.record_winners(eps, plan.registry.available())?;
        }
    }
    match settings.rule {
        UpdateRule::Perturbed => {
            let deltas: Vec<Matrix> = perturbations.into_iter().map(|p| p.delta).collect();
            let (ploss, pgrads) = loss_and_grads(model, x, y, Some(&deltas), active)?;
            opt.apply(model, &pgrads.weights, &grads.head)?;
            Ok(StepOutcome {
                loss,
                perturbed_loss: Some(ploss),
            })
        }
        UpdateRule::Unperturbed => {
            opt.apply(model, &grads.weights, &grads.head)?;
            Ok(StepOutcome {
                loss,
                perturbed_loss: None,
            })
        }
    }
}

/// Plain gradient step on all trainable parameters (no perturbation).
pub fn plain_grad_step(
    model: &mut Mlp,
    x: &Matrix,
    y: &[usize],
    active: Option<&Range<usize>>,
    opt: &mut TaskOptimizer,
) -> Result<f64> {
    let (loss, grads) = loss_and_grads(model, x, y, None, active)?;
    opt.apply(model, &grads.weights, &grads.head)?;
    Ok(loss)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    /// Mean unperturbed batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// How a task's steps are taken.
pub enum Trainer<'a> {
    Plan {
        plans: &'a mut [LayerPlan],
        settings: PerturbSettings,
    },
    Plain,
}

/// Runs `epochs` passes over shuffled mini-batches of `data`, then freezes
/// the live adapters and head blocks.
#[allow(clippy::too_many_arguments)]
pub fn train_task(
    model: &mut Mlp,
    data: &Split,
    active: Option<&Range<usize>>,
    trainer: Trainer<'_>,
    opt: &mut TaskOptimizer,
    epochs: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<TaskSummary> {
    let mut trainer = trainer;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut summary = TaskSummary::default();
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size.max(1)) {
            let xb = data.x.gather_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| data.y[i]).collect();
            let loss = match &mut trainer {
                Trainer::Plan { plans, settings } => {
                    perturbed_grad_step(model, &xb, &yb, active, plans, opt, settings)?.loss
                }
                Trainer::Plain => plain_grad_step(model, &xb, &yb, active, opt)?,
            };
            total += loss;
            batches += 1;
            summary.steps += 1;
        }
        summary.epoch_losses.push(total / batches.max(1) as f64);
    }
    model.freeze_task()?;
    Ok(summary)
}
