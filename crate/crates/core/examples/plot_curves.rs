//! Running-accuracy curves for two methods, rendered to SVG plus the CSV
//! the plots are drawn from.
//!
//! ```bash
//! cargo run --release --example plot_curves
//! ```

use plan_cl::harness::{run_single, ExperimentConfig};
use plan_cl::plot::write_plots;
use plan_cl::variants::Method;

fn main() -> plan_cl::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.tasks.n_tasks = 4;
    cfg.tasks.dim = 24;
    cfg.model.hidden = vec![24];
    cfg.model.features = 24;
    cfg.plan.rank = 2;
    let stream = cfg.build_stream()?;

    let mut results = Vec::new();
    for method in [Method::Plan, Method::IncLora] {
        cfg.plan.method = method;
        for seed in 0..2 {
            results.push(run_single(&cfg, &stream, seed)?);
        }
    }
    let out = std::env::temp_dir().join("plan-examples").join("plots");
    let written = write_plots(&results, &out)?;
    for p in written.svgs.iter().chain([&written.csv]) {
        println!("{}", p.display());
    }
    Ok(())
}
