//! A stream where every task re-uses the same clusters under a different
//! plane rotation, so tasks share structure but not features.
//!
//! ```bash
//! cargo run --release --example rotated_stream
//! ```

use plan_cl::harness::{run_single, ExperimentConfig, Generator};
use plan_cl::variants::Method;

fn main() -> plan_cl::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.tasks.generator = Generator::Rotated;
    cfg.tasks.n_tasks = 1;
    cfg.tasks.angles = vec![0.0, 0.6, 1.2, 1.8];
    cfg.tasks.dim = 24;
    cfg.model.hidden = vec![24];
    cfg.model.features = 24;
    cfg.plan.rank = 3;
    let stream = cfg.build_stream()?;
    println!("{} tasks, {} classes", stream.num_tasks(), stream.total_classes());

    for method in Method::ALL {
        cfg.plan.method = method;
        let r = run_single(&cfg, &stream, 0)?;
        println!(
            "{:<22} Acc {:5.2}  AAA {:5.2}",
            method.to_string(),
            100.0 * r.acc,
            100.0 * r.aaa
        );
    }
    Ok(())
}
