//! How the next task's basis directions are chosen.
//!
//! Each step records the columns that the worst-case perturbation touches
//! least; after the task, the most frequently recorded free indices go to
//! the next task. A sliding window keeps only the latest steps.
//!
//! ```bash
//! cargo run --release --example basis_selection
//! ```

use plan_cl::plan::{solve_epsilon, BasisRegistry, PerturbationTracker, Window};
use plan_cl::tensor::{NormOrder, Rng};

fn main() -> plan_cl::Result<()> {
    let k = 10;
    let mut registry = BasisRegistry::standard(k);
    let first = registry.allocate_first(3)?;
    println!("task 1 takes {first:?}, free {:?}", registry.available());

    let mut tracker = PerturbationTracker::new(Window::Steps(20), 3);
    let mut rng = Rng::new(4);
    // gradients that are consistently small on the last few directions
    let scale: Vec<f64> = (0..registry.available().len())
        .map(|j| 1.0 / (1.0 + j as f64))
        .collect();
    for _ in 0..50 {
        let mut g = rng.normal_matrix(6, registry.available().len(), 1.0);
        for r in 0..g.rows() {
            for (c, s) in scale.iter().enumerate() {
                g[(r, c)] *= s;
            }
        }
        let eps = solve_epsilon(&g, 0.05, NormOrder::Two);
        tracker.record_winners(&eps, registry.available())?;
    }
    println!("{} steps seen, {} kept", tracker.pushes(), tracker.len());
    println!("frequencies {:?}", tracker.frequencies());

    let next = tracker.select_next(&mut registry, 3)?;
    println!("task 2 takes {next:?}, free {:?}", registry.available());
    println!("allocations {:?}", registry.allocations());
    Ok(())
}
