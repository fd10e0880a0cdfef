use crate::tensor::{flatten_norm, Matrix, NormOrder};

/// Worst-case perturbation of the linearized loss over the `l_p` ball of radius `rho`.
///
/// Maximizes `<eps, g>` subject to `||eps||_p <= rho`, norms over flattened entries:
///
/// * `p = 2`: `rho * g / ||g||_2`
/// * `p = inf`: `rho * sign(g)`
/// * `p = 1`: `rho * sign(g_ij)` at the single entry of largest `|g|` (lowest
///   flat index on ties), zero elsewhere.
///
/// A zero gradient yields a zero perturbation.
pub fn solve_epsilon(g: &Matrix, rho: f64, p: NormOrder) -> Matrix {
    let mut eps = Matrix::zeros(g.rows(), g.cols());
    match p {
        NormOrder::Two => {
            let n = flatten_norm(g, NormOrder::Two);
            if n > 0.0 {
                // Normalize first so tiny gradients do not lose precision.
                let scale = g.max_abs();
                let unit = g.scale(1.0 / scale);
                let n_unit = flatten_norm(&unit, NormOrder::Two);
                for (e, u) in eps.data_mut().iter_mut().zip(unit.data()) {
                    *e = rho * u / n_unit;
                }
            }
        }
        NormOrder::Inf => {
            for (e, v) in eps.data_mut().iter_mut().zip(g.data()) {
                *e = if *v > 0.0 {
                    rho
                } else if *v < 0.0 {
                    -rho
                } else {
                    0.0
                };
            }
        }
        NormOrder::One => {
            let mut best: Option<(usize, f64)> = None;
            for (i, v) in g.data().iter().enumerate() {
                if *v != 0.0 && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((i, v.abs()));
                }
            }
            if let Some((i, _)) = best {
                eps.data_mut()[i] = rho * g.data()[i].signum();
            }
        }
    }
    eps
}

/// `<a, b>` over flattened entries.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    crate::tensor::dot(a.data(), b.data())
}
