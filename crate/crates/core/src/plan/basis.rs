use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{complete_basis, gram_schmidt, orthonormality_error, svd_small, Matrix, Rng};

/// How the pool of orthonormal basis vectors is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Unit vectors `e_1..e_k`.
    Standard,
    /// Gram-Schmidt orthogonalized Gaussian matrix.
    RandomOrthogonal,
    /// Right singular vectors of the first task's full-batch gradient.
    GradientSvd,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Standard => "standard",
            BasisKind::RandomOrthogonal => "random_orthogonal",
            BasisKind::GradientSvd => "gradient_svd",
        })
    }
}

impl FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "standard" => Ok(BasisKind::Standard),
            "random_orthogonal" => Ok(BasisKind::RandomOrthogonal),
            "gradient_svd" => Ok(BasisKind::GradientSvd),
            other => Err(format!(
                "unknown basis kind `{other}` (expected standard, random_orthogonal or gradient_svd)"
            )),
        }
    }
}

/// Tolerance on `|G G^T - I|` for non-standard bases.
pub const ORTHO_TOL: f64 = 1e-10;

/// Pool of `k` orthonormal row vectors and the bookkeeping of which rows
/// each task owns. Row indices are 0-based.
///
/// `available` is kept sorted, so the rows of `M_t` appear in index order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisRegistry {
    kind: BasisKind,
    basis: Matrix,
    available: Vec<usize>,
    allocations: Vec<Vec<usize>>,
}

impl BasisRegistry {
    pub fn standard(k: usize) -> Self {
        BasisRegistry {
            kind: BasisKind::Standard,
            basis: Matrix::identity(k),
            available: (0..k).collect(),
            allocations: Vec::new(),
        }
    }

    pub fn random_orthogonal(k: usize, rng: &mut Rng) -> Result<Self> {
        let g = gram_schmidt(&rng.normal_matrix(k, k, 1.0))?;
        Self::from_basis(BasisKind::RandomOrthogonal, g)
    }

    /// Basis from the SVD of a `d x k` gradient: the right singular vectors
    /// in decreasing singular-value order, completed to `k` rows when `d < k`.
    pub fn gradient_svd(grad: &Matrix) -> Result<Self> {
        let svd = svd_small(grad)?;
        let rows = svd.v.transpose();
        Self::from_basis(BasisKind::GradientSvd, complete_basis(&rows)?)
    }

    pub fn from_basis(kind: BasisKind, basis: Matrix) -> Result<Self> {
        if basis.rows() != basis.cols() {
            return Err(Error::Shape {
                op: "basis matrix",
                lhs: basis.shape(),
                rhs: (basis.cols(), basis.cols()),
            });
        }
        let err = orthonormality_error(&basis);
        if err > ORTHO_TOL {
            return Err(Error::InvalidState(format!(
                "basis rows not orthonormal (max |GG^T - I| = {err:.3e})"
            )));
        }
        Ok(BasisRegistry {
            kind,
            available: (0..basis.rows()).collect(),
            basis,
            allocations: Vec::new(),
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn available(&self) -> &[usize] {
        &self.available
    }

    pub fn allocations(&self) -> &[Vec<usize>] {
        &self.allocations
    }

    pub fn is_fresh(&self) -> bool {
        self.allocations.is_empty()
    }

    /// Allocates the first `r1` rows for task 1.
    pub fn allocate_first(&mut self, r1: usize) -> Result<Vec<usize>> {
        if !self.is_fresh() {
            return Err(Error::InvalidState(
                "allocate_first called on a registry that already has allocations".into(),
            ));
        }
        let idx: Vec<usize> = (0..r1).collect();
        self.allocate(&idx)?;
        Ok(idx)
    }

    /// Moves `indices` from `available` into a new allocation (basis shrinkage).
    pub fn allocate(&mut self, indices: &[usize]) -> Result<()> {
        if indices.len() > self.available.len() {
            return Err(Error::BasisExhausted {
                requested: indices.len(),
                available: self.available.len(),
            });
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(Error::InvalidState(format!("duplicate indices in {indices:?}")));
        }
        if let Some(bad) = sorted.iter().find(|i| self.available.binary_search(i).is_err()) {
            return Err(Error::InvalidState(format!("basis index {bad} is not available")));
        }
        self.available.retain(|i| sorted.binary_search(i).is_err());
        self.allocations.push(indices.to_vec());
        Ok(())
    }

    /// Basis rows at `indices` (`|indices| x k`); for an allocation this is `A_t`.
    pub fn rows(&self, indices: &[usize]) -> Matrix {
        self.basis.gather_rows(indices)
    }

    /// `M_t`: the unallocated rows stacked in index order.
    pub fn m_t(&self) -> Matrix {
        self.rows(&self.available)
    }

    fn check_grad(&self, grad: &Matrix) -> Result<()> {
        if grad.cols() != self.dim() {
            return Err(Error::Shape {
                op: "gather_gradient",
                lhs: grad.shape(),
                rhs: self.basis.shape(),
            });
        }
        if self.available.is_empty() {
            return Err(Error::BasisExhausted {
                requested: 1,
                available: 0,
            });
        }
        Ok(())
    }

    /// `g = grad M_t^T` (`d x |M_t|`). Column gather for the standard basis,
    /// explicit product otherwise.
    pub fn gather_gradient(&self, grad: &Matrix) -> Result<Matrix> {
        self.check_grad(grad)?;
        match self.kind {
            BasisKind::Standard => Ok(grad.gather_cols(&self.available)),
            _ => grad.matmul_t(&self.m_t()),
        }
    }

    /// Always uses the explicit product `grad M_t^T`.
    pub fn gather_gradient_general(&self, grad: &Matrix) -> Result<Matrix> {
        self.check_grad(grad)?;
        grad.matmul_t(&self.m_t())
    }

    /// `delta = eps M_t` (`d x k`). Column scatter for the standard basis.
    pub fn scatter(&self, eps: &Matrix) -> Result<Matrix> {
        if eps.cols() != self.available.len() {
            return Err(Error::Shape {
                op: "scatter",
                lhs: eps.shape(),
                rhs: (self.available.len(), self.dim()),
            });
        }
        match self.kind {
            BasisKind::Standard => {
                let mut out = Matrix::zeros(eps.rows(), self.dim());
                for i in 0..eps.rows() {
                    for (j, &col) in self.available.iter().enumerate() {
                        out[(i, col)] = eps[(i, j)];
                    }
                }
                Ok(out)
            }
            _ => eps.matmul(&self.m_t()),
        }
    }

    /// Always uses the explicit product `eps M_t`.
    pub fn scatter_general(&self, eps: &Matrix) -> Result<Matrix> {
        eps.matmul(&self.m_t())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_allocation() {
        let mut reg = BasisRegistry::standard(8);
        assert_eq!(reg.allocate_first(2).unwrap(), vec![0, 1]);
        assert_eq!(reg.available(), &[2, 3, 4, 5, 6, 7]);
        assert!(reg.allocate_first(2).is_err());
    }

    #[test]
    fn full_allocation_empties_pool() {
        let mut reg = BasisRegistry::standard(4);
        reg.allocate_first(4).unwrap();
        assert!(reg.available().is_empty());
        assert!(matches!(
            reg.gather_gradient(&Matrix::zeros(2, 4)),
            Err(Error::BasisExhausted { .. })
        ));
    }

    #[test]
    fn over_allocation_errors() {
        let mut reg = BasisRegistry::standard(3);
        assert!(matches!(
            reg.allocate_first(4),
            Err(Error::BasisExhausted {
                requested: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn gather_standard_picks_columns() {
        let mut reg = BasisRegistry::standard(6);
        reg.allocate(&[0, 1, 3, 5]).unwrap();
        assert_eq!(reg.available(), &[2, 4]);
        let grad = Matrix::from_fn(3, 6, |i, j| (10 * i + j) as f64);
        let g = reg.gather_gradient(&grad).unwrap();
        assert_eq!(g, grad.gather_cols(&[2, 4]));
        assert_eq!(reg.gather_gradient(&Matrix::zeros(3, 6)).unwrap(), Matrix::zeros(3, 2));
    }

    #[test]
    fn random_orthogonal_paths_match_hand_product() {
        let mut rng = Rng::new(7);
        let mut reg = BasisRegistry::random_orthogonal(6, &mut rng).unwrap();
        reg.allocate_first(2).unwrap();
        let grad = rng.normal_matrix(4, 6, 1.0);
        let m = reg.m_t();
        let hand = Matrix::from_fn(4, 4, |i, j| (0..6).map(|c| grad[(i, c)] * m[(j, c)]).sum());
        assert!(reg.gather_gradient(&grad).unwrap().max_abs_diff(&hand) < 1e-12);
    }

    #[test]
    fn allocate_rejects_taken_index() {
        let mut reg = BasisRegistry::standard(5);
        reg.allocate_first(2).unwrap();
        assert!(reg.allocate(&[1]).is_err());
        assert!(reg.allocate(&[3, 3]).is_err());
    }

    #[test]
    fn gradient_svd_basis_is_orthonormal() {
        let mut rng = Rng::new(2);
        let grad = rng.normal_matrix(3, 7, 1.0);
        let reg = BasisRegistry::gradient_svd(&grad).unwrap();
        assert_eq!(reg.basis().shape(), (7, 7));
        assert!(orthonormality_error(reg.basis()) <= ORTHO_TOL);
    }
}
