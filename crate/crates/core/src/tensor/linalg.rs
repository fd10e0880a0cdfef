//! Orthogonalization and a small dense SVD.

use super::matrix::{dot, scaled_l2, Matrix};
use crate::error::{Error, Result};

/// Residual norm (relative to the input row norm) below which a row counts as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Off-diagonal threshold for the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-12;

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Modified Gram-Schmidt with one re-orthogonalization pass over the rows of `m`.
///
/// Row `i` of the output is the normalized residual of input row `i` against the
/// previous outputs, so row order and span are preserved.
pub fn gram_schmidt(m: &Matrix) -> Result<Matrix> {
    if m.rows() > m.cols() {
        return Err(Error::RankDeficient {
            row: m.cols(),
            residual: 0.0,
        });
    }
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let original = scaled_l2(m.row(i));
        let mut v = m.row(i).to_vec();
        for _pass in 0..2 {
            for j in 0..i {
                let q = out.row(j);
                let proj = dot(&v, q);
                for (x, qx) in v.iter_mut().zip(q) {
                    *x -= proj * qx;
                }
            }
        }
        let residual = scaled_l2(&v);
        if original == 0.0 || residual <= RANK_TOL * original {
            return Err(Error::RankDeficient { row: i, residual });
        }
        for (o, x) in out.row_mut(i).iter_mut().zip(&v) {
            *o = x / residual;
        }
    }
    Ok(out)
}

/// Thin SVD `m = U diag(S) V^T`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows x n`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, length `n = min(rows, cols)`.
    pub s: Vec<f64>,
    /// `cols x n`, orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.s.len(), |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul_t(&self.v).expect("svd factors have consistent shapes")
    }
}

/// One-sided (Hestenes) Jacobi SVD for desk-scale matrices.
pub fn svd_small(m: &Matrix) -> Result<Svd> {
    if m.rows() < m.cols() {
        let t = svd_small(&m.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (rows, n) = m.shape();
    // Column-major working copies.
    let mut a: Vec<Vec<f64>> = (0..n).map(|c| m.col(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = n < 2;
    let mut residual = 0.0;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        residual = 0.0_f64;
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                residual = residual.max(off);
                if off <= JACOBI_TOL {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            residual,
        });
    }

    let norms: Vec<f64> = a.iter().map(|c| scaled_l2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let s: Vec<f64> = order.iter().map(|&c| norms[c]).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let cutoff = smax * f64::EPSILON * (rows.max(n) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (k, &c) in order.iter().enumerate() {
        if s[k] > cutoff && s[k] > 0.0 {
            u_cols.push(a[c].iter().map(|x| x / s[k]).collect());
        } else {
            u_cols.push(vec![0.0; rows]);
            pending.push(k);
        }
    }
    // Null directions: complete U with standard basis vectors orthogonalized
    // against what we already have.
    let mut e = 0;
    for k in pending {
        loop {
            assert!(e < rows, "cannot complete orthonormal basis");
            let mut cand = vec![0.0; rows];
            cand[e] = 1.0;
            e += 1;
            for _pass in 0..2 {
                for (idx, col) in u_cols.iter().enumerate() {
                    if idx == k {
                        continue;
                    }
                    let p = dot(&cand, col);
                    for (x, y) in cand.iter_mut().zip(col) {
                        *x -= p * y;
                    }
                }
            }
            let nrm = scaled_l2(&cand);
            if nrm > 1e-8 {
                u_cols[k] = cand.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }

    let u = Matrix::from_fn(rows, n, |r, k| u_cols[k][r]);
    let vm = Matrix::from_fn(n, n, |r, k| v[order[k]][r]);
    Ok(Svd { u, s, v: vm })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Extends orthonormal rows `q` (r x k) to a full k x k orthonormal basis by
/// appending standard basis vectors orthogonalized against the existing rows.
pub fn complete_basis(q: &Matrix) -> Result<Matrix> {
    let k = q.cols();
    let mut rows: Vec<Vec<f64>> = (0..q.rows()).map(|r| q.row(r).to_vec()).collect();
    for e in 0..k {
        if rows.len() == k {
            break;
        }
        let mut cand = vec![0.0; k];
        cand[e] = 1.0;
        for _pass in 0..2 {
            for row in &rows {
                let p = dot(&cand, row);
                for (x, y) in cand.iter_mut().zip(row) {
                    *x -= p * y;
                }
            }
        }
        let nrm = scaled_l2(&cand);
        if nrm > 1e-6 {
            rows.push(cand.into_iter().map(|x| x / nrm).collect());
        }
    }
    if rows.len() != k {
        return Err(Error::InvalidState(format!(
            "basis completion produced {} of {} rows",
            rows.len(),
            k
        )));
    }
    Ok(Matrix::from_rows(&rows))
}

/// `max |G G^T - I|` for a matrix with (intended) orthonormal rows.
pub fn orthonormality_error(g: &Matrix) -> f64 {
    let ggt = g.matmul_t(g).expect("square product");
    ggt.max_abs_diff(&Matrix::identity(g.rows()))
}
