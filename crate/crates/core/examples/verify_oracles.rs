//! The built-in verification suite: closed-form optimality against a
//! search oracle, finite-difference gradients at the perturbed point, fast
//! vs explicit projection paths, and structural checks on short runs.
//!
//! ```bash
//! cargo run --release --example verify_oracles
//! ```

use plan_cl::oracle::{verify_suite, VerifyOptions};
use plan_cl::plan::solve_epsilon;

fn main() -> plan_cl::Result<()> {
    let report = verify_suite(&solve_epsilon, &VerifyOptions::default())?;
    for s in &report.gap_stats {
        println!(
            "p = {:<3} {} instances, max gap {:.2e}, max analytic error {:.2e}",
            s.p, s.instances, s.max_gap, s.max_analytic_error
        );
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("overall: {}", if report.passed { "pass" } else { "fail" });
    Ok(())
}
