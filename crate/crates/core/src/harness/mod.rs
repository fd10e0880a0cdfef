//! Experiment orchestration: config files, seeded runs, seed aggregation,
//! sweeps and ablations, and the JSON / CSV artifacts they write.
//!
//! Output files are hash-named and never overwritten; a name clash gets a
//! numeric suffix.

mod aggregate;
mod config;
mod run;
mod sweep;

pub use aggregate::{aggregate_seeds, Summary};
pub use config::{
    Backbone, ExperimentConfig, Generator, ModelSection, PlanSection, RunSection, SweepSection, TasksSection,
};
pub use run::{
    build_backbone, run_experiment, run_jobs, run_single, runs_csv, unique_path, write_new, write_results,
    ExperimentOutput, RunResult, Timing, PRETRAIN_BATCH, RUNS_CSV_HEADER, SCHEMA_VERSION,
};
pub use sweep::{
    ablate, jaccard, parse_axis_values, run_sweep, second_task_set, sweep, AxisValue, SweepAxis, SweepOutput,
    SweepReport, SweepRow, SUMMARY_CSV_HEADER,
};
