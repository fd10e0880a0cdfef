use serde::{Deserialize, Serialize};

use super::tracker::Window;
use crate::error::{Error, Result};
use crate::tensor::NormOrder;

/// Which logits the training loss sees. Evaluation always uses every seen class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossScope {
    /// Softmax over all classes seen so far.
    #[default]
    SeenClasses,
    /// Softmax over the current task's classes only.
    CurrentTask,
}

/// Hyperparameters of one continual-learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Perturbation radius.
    pub rho: f64,
    pub p: NormOrder,
    /// Adapter rank used for every task unless `ranks` overrides it.
    pub rank: usize,
    /// Optional per-task ranks.
    pub ranks: Option<Vec<usize>>,
    pub window: Window,
    /// Keep frequency statistics across task boundaries instead of resetting.
    pub cumulative_frequency: bool,
    pub loss_scope: LossScope,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            rho: 0.01,
            p: NormOrder::Two,
            rank: 4,
            ranks: None,
            window: Window::Steps(50),
            cumulative_frequency: false,
            loss_scope: LossScope::default(),
            lr: 1e-3,
            epochs: 5,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl PlanConfig {
    /// Rank `r_t` of task `t` (0-based).
    pub fn rank_for(&self, t: usize) -> usize {
        match &self.ranks {
            Some(r) => r.get(t).copied().unwrap_or(self.rank),
            None => self.rank,
        }
    }

    pub fn total_rank(&self, n_tasks: usize) -> usize {
        (0..n_tasks).map(|t| self.rank_for(t)).sum()
    }

    /// Checks the run-independent constraints, then that `sum r_t <= k` for
    /// every layer input dimension in `layer_dims`.
    pub fn validate(&self, n_tasks: usize, layer_dims: &[usize]) -> Result<()> {
        if self.rho <= 0.0 || !self.rho.is_finite() {
            return Err(Error::config("plan.rho", "must be finite and > 0"));
        }
        if (0..n_tasks).any(|t| self.rank_for(t) == 0) {
            return Err(Error::config("plan.rank", "every task rank must be >= 1"));
        }
        if let Some(r) = &self.ranks {
            if r.len() != n_tasks {
                return Err(Error::config(
                    "plan.ranks",
                    format!("{} ranks given for {n_tasks} tasks", r.len()),
                ));
            }
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::config("run.lr", "must be finite and > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("run.epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("run.batch_size", "must be >= 1"));
        }
        let total = self.total_rank(n_tasks);
        if let Some(&k) = layer_dims.iter().filter(|&&k| total > k).min() {
            return Err(Error::BasisExhausted {
                requested: total,
                available: k,
            });
        }
        Ok(())
    }
}
