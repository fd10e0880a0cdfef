//! How the second task's selected indices depend on the window length.
//! Each window is compared with the full-history selection by Jaccard
//! overlap of `(layer, index)` pairs.
//!
//! ```bash
//! cargo run --release --example window_stability
//! ```

use std::path::Path;

use plan_cl::harness::{run_sweep, AxisValue, ExperimentConfig, SweepAxis};
use plan_cl::plan::Window;

fn main() -> plan_cl::Result<()> {
    let mut cfg =
        ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/window_sweep.toml"))?;
    cfg.run.seeds = 1;
    let values: Vec<AxisValue> = [Window::Steps(1), Window::Steps(10), Window::Steps(50), Window::Full]
        .into_iter()
        .map(AxisValue::Window)
        .collect();

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (report, _) = run_sweep(&cfg, SweepAxis::Window, &values, threads)?;
    for row in &report.rows {
        let overlap = row.jaccard_vs_ref.map_or("-".to_string(), |j| format!("{j:.3}"));
        println!("S = {:>4}  overlap vs full {overlap}", row.value);
        if let Some(sets) = &row.selected_sets {
            println!("          task-2 set (seed 0): {:?}", sets[0]);
        }
    }
    Ok(())
}
