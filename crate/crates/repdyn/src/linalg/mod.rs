//! Dense linear algebra: matrices, SVD, matrix exponential, SPD solves and
//! Procrustes alignment.

mod cholesky;
mod expm;
mod mat;
mod procrustes;
mod svd;

pub use cholesky::{cholesky, inv_spd, solve_spd};
pub use expm::{matrix_exp, ExpmTrace};
pub use mat::{frob_dist, Mat, Scalar};
pub use procrustes::procrustes_rotation;
pub use svd::{qr_thin, svd, Svd};
