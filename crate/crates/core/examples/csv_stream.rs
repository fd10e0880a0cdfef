//! Round-trips a synthetic stream through CSV and trains on the reloaded
//! copy. Any labelled feature table in the same layout can be used instead.
//!
//! ```bash
//! cargo run --release --example csv_stream
//! ```

use plan_cl::harness::{build_backbone, ExperimentConfig};
use plan_cl::tasks::{export_csv, load_csv_stream};
use plan_cl::tensor::Rng;
use plan_cl::variants::run_sequence;

fn main() -> plan_cl::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.tasks.n_tasks = 3;
    cfg.tasks.dim = 16;
    cfg.model.hidden = vec![16];
    cfg.model.features = 16;
    cfg.plan.rank = 2;
    let original = cfg.build_stream()?;

    let dir = std::env::temp_dir().join("plan-examples").join("csv");
    let (path, schema) = export_csv(&original, &dir, "stream")?;
    let reloaded = load_csv_stream(&path, &schema)?;
    println!("wrote {}", path.display());
    println!(
        "hash before {} after {}",
        &original.content_hash()[..12],
        &reloaded.content_hash()[..12]
    );
    println!("task labels {:?}", schema.task_labels);

    let (model, _) = build_backbone(&cfg, &reloaded, 0)?;
    let out = run_sequence(model, &reloaded, &cfg.method_spec(), &cfg.plan_config(0), &Rng::new(0))?;
    println!("final row {:?}", out.accuracy.rows().last().unwrap());
    Ok(())
}
