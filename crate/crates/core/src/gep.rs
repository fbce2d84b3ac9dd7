//! Symmetric-definite generalized eigenvalue problems and the exact oracle.

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, chol_inv_sqrt, cholesky, sym_eig, Matrix};

/// `Au = λBu` with symmetric `A` and positive definite `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GepPair {
    a: Matrix,
    b: Matrix,
}

impl GepPair {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        Self::with_jitter(a, b, 0.0)
    }

    /// Adds `jitter·I` to `B` before the positive-definiteness check.
    pub fn with_jitter(a: Matrix, b: Matrix, jitter: f64) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch(format!(
                "A is {:?} but B is {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!("jitter must be >= 0, got {jitter}")));
        }
        check_symmetric(&a)?;
        check_symmetric(&b)?;
        let mut b = b.symmetrize();
        for i in 0..b.rows() {
            b[(i, i)] += jitter;
        }
        cholesky(&b)?;
        Ok(Self { a: a.symmetrize(), b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }
}

/// Descending generalized eigenvalues (or canonical correlations).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts the values into descending order.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.partial_cmp(a).expect("spectrum values must not be NaN"));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn truncate(&self, k: usize) -> Spectrum {
        Spectrum {
            values: self.values.iter().take(k).copied().collect(),
        }
    }
}

/// Top-K generalized eigenpairs with `UᵀBU = I_K`.
///
/// Works through the symmetric matrix `B^{-1/2} A B^{-1/2}` and maps its
/// eigenvectors back with `B^{-1/2}`.
pub fn gep_solve(pair: &GepPair, k: usize) -> Result<(Spectrum, Matrix)> {
    let d = pair.dim();
    if k > d {
        return Err(Error::KTooLarge { k, dim: d });
    }
    let s = chol_inv_sqrt(pair.b(), 0.0)?;
    let c = s.matmul(pair.a()).matmul(&s).symmetrize();
    let eig = sym_eig(&c)?;
    let u = s.matmul(&eig.eigenvectors.columns(0..k));
    Ok((Spectrum::new(eig.eigenvalues[..k].to_vec()), u))
}
