//! Proactive low-rank allocation: basis registry, closed-form worst-case
//! perturbation, perturbed `B_t` updates and frequency-based selection of the
//! next task's subspace.

mod basis;
mod config;
mod perturb;
mod step;
mod tracker;

pub use basis::{BasisKind, BasisRegistry, ORTHO_TOL};
pub use config::{LossScope, PlanConfig};
pub use perturb::{inner, solve_epsilon};
pub use step::{
    compute_perturbations, perturbed_grad_step, plain_grad_step, train_task, LayerPerturbation, LayerPlan,
    PerturbSettings, StepOutcome, TaskOptimizer, TaskSummary, Trainer, UpdateRule,
};
pub use tracker::{PerturbationTracker, Window};
