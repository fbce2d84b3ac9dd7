use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Unbiased cross-covariance of the columns of `xa` (M×p) and `xb` (M×q).
///
/// Columns are mean-centered and the product is divided by `M − 1`.
pub fn empirical_cov(xa: &Matrix, xb: &Matrix) -> Result<Matrix> {
    if xa.rows() != xb.rows() {
        return Err(Error::ShapeMismatch(format!(
            "covariance inputs have {} and {} rows",
            xa.rows(),
            xb.rows()
        )));
    }
    let m = xa.rows();
    if m < 2 {
        return Err(Error::TooFewSamples(m));
    }
    Ok(cov_of_centered(&xa.centered(), &xb.centered()))
}

/// `āᵀ b̄ / (M − 1)` for inputs that are already centered.
pub fn cov_of_centered(a: &Matrix, b: &Matrix) -> Matrix {
    let m = a.rows();
    a.t_matmul(b).scale(1.0 / (m as f64 - 1.0))
}
