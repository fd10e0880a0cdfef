//! Smallest end-to-end run: build a short synthetic stream, train PLAN over
//! it and print the accuracy matrix with the summary metrics.
//!
//! ```bash
//! cargo run --release --example quickstart
//! ```

use plan_cl::harness::{run_single, ExperimentConfig};

fn main() -> plan_cl::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.tasks.n_tasks = 3;
    cfg.tasks.dim = 32;
    cfg.model.hidden = vec![32];
    cfg.model.features = 32;
    cfg.plan.rank = 4;

    let stream = cfg.build_stream()?;
    let result = run_single(&cfg, &stream, 0)?;

    println!("method {}, stream {}", cfg.plan.method, &result.stream_hash[..12]);
    for (t, row) in result.accuracy.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|a| format!("{:5.1}", 100.0 * a)).collect();
        println!("after task {}: {}", t + 1, cells.join(" "));
    }
    println!("Acc {:.2}  AAA {:.2}", 100.0 * result.acc, 100.0 * result.aaa);
    for (t, idx) in result.allocations.iter().enumerate() {
        println!("task {} owns layer-0 indices {:?}", t + 1, idx[0]);
    }
    Ok(())
}
