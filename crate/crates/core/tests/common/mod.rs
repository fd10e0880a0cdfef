#![allow(dead_code)]

use plan_cl::harness::ExperimentConfig;
use proptest::test_runner::{Config, RngSeed};

/// Proptest settings with a pinned seed so every run draws the same cases.
pub fn cases(n: u32) -> Config {
    Config {
        cases: n,
        rng_seed: RngSeed::Fixed(0x9e37_79b9),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Three small tasks on a 12-dim stream; a full run takes milliseconds.
pub fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.tasks.n_tasks = 3;
    cfg.tasks.classes_per_task = 2;
    cfg.tasks.dim = 12;
    cfg.tasks.samples_per_class = 30;
    cfg.tasks.base_classes = 2;
    cfg.model.hidden = vec![10];
    cfg.model.features = 8;
    cfg.model.pretrain_epochs = 2;
    cfg.plan.rank = 2;
    cfg.run.seeds = 2;
    cfg.run.epochs = 2;
    cfg.run.batch_size = 16;
    cfg
}
