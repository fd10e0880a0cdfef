//! PLAN against Inc-LoRA and the two ablations on the shipped default
//! protocol, all on the same stream and seeds.
//!
//! ```bash
//! cargo run --release --example ablation -- [seeds]
//! ```

use std::path::Path;

use plan_cl::harness::{ablate, ExperimentConfig};

fn main() -> plan_cl::Result<()> {
    let mut cfg = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml"))?;
    cfg.run.seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);

    let out = std::env::temp_dir().join("plan-examples").join("ablation");
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let res = ablate(&cfg, &out, threads)?;
    print!("{}", res.report.to_table());
    println!("summary written to {}", res.summary_csv.display());
    Ok(())
}
