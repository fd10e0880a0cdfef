//! Sensitivity to the perturbation radius over the shipped sweep values.
//!
//! ```bash
//! cargo run --release --example rho_sweep
//! ```

use std::path::Path;

use plan_cl::harness::{parse_axis_values, run_sweep, ExperimentConfig, SweepAxis};

fn main() -> plan_cl::Result<()> {
    let mut cfg = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/rho_sweep.toml"))?;
    cfg.run.seeds = 2;
    let section = cfg.sweep.clone().expect("config has a [sweep] section");
    let values = parse_axis_values(SweepAxis::Rho, &section.values)?;

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (report, _) = run_sweep(&cfg, SweepAxis::Rho, &values, threads)?;
    print!("{}", report.to_table());
    Ok(())
}
