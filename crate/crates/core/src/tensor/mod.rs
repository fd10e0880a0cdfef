//! Dense matrices, norms, orthogonalization, small SVD and seeded randomness.

mod linalg;
mod matrix;
mod norm;
mod rng;

pub use linalg::{
    complete_basis, gram_schmidt, orthonormality_error, svd_small, Svd, JACOBI_MAX_SWEEPS, JACOBI_TOL, RANK_TOL,
};
pub use matrix::{dot, scaled_l2, Matrix};
pub use norm::{flatten_norm, vec_norm, NormOrder};
pub use rng::Rng;
