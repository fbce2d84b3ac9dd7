//! Dense linear algebra used throughout the crate.

mod cov;
mod decomp;
mod matrix;

pub use cov::{cov_of_centered, empirical_cov};
pub use decomp::{
    chol_inv_sqrt, cholesky, fix_signs, metric_orthonormalize, numerical_rank, orthonormal_columns,
    principal_angles, solve_spd, svd, sym_eig, Svd, SymEigResult, SYMMETRY_TOL,
};
pub(crate) use decomp::check_symmetric;
pub use matrix::{dot, Matrix};
