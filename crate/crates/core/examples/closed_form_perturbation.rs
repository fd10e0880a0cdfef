//! Worst-case perturbation inside an `l_p` ball, for `p` in {1, 2, inf}.
//!
//! The closed form is compared against the dual-norm value `rho ||g||_q`
//! and against a projected-ascent search that knows nothing about it.
//!
//! ```bash
//! cargo run --release --example closed_form_perturbation
//! ```

use plan_cl::oracle::{ball_max_oracle, dual_value};
use plan_cl::plan::{inner, solve_epsilon};
use plan_cl::tensor::{flatten_norm, Matrix, NormOrder};

fn main() {
    let g = Matrix::from_rows(&[[3.0, -4.0, 0.5], [0.0, 1.0, -2.0]]);
    let rho = 0.1;
    for p in NormOrder::ALL {
        let eps = solve_epsilon(&g, rho, p);
        let search = ball_max_oracle(&g, rho, p, 500, 8, 0);
        println!("p = {p}");
        for r in 0..eps.rows() {
            println!("  eps row {r}: {:?}", eps.row(r));
        }
        println!("  ||eps||_p     = {:.6}", flatten_norm(&eps, p));
        println!("  <eps, g>      = {:.6}", inner(&eps, &g));
        println!("  rho ||g||_q   = {:.6}", dual_value(&g, rho, p));
        println!("  ascent search = {:.6}", search.search_value);
    }
    let zero = solve_epsilon(&Matrix::zeros(2, 3), rho, NormOrder::Two);
    println!("zero gradient gives zero perturbation: {}", zero.max_abs() == 0.0);
}
