//! Access to `A` and `B` through their action on a `D × K` matrix.
//!
//! Solvers only ever need `AU` and `BU`. Dense pairs compute these directly;
//! a [`BatchEstimate`] computes them from a mini-batch in `O(MDK)` time
//! without forming any `D × D` covariance.

use crate::data::{check_alpha, MultiviewBatch};
use crate::error::{Error, Result};
use crate::gep::GepPair;
use crate::linalg::{cov_of_centered, Matrix};

pub trait GepEstimate {
    fn dim(&self) -> usize;
    fn apply_a(&self, u: &Matrix) -> Matrix;
    fn apply_b(&self, u: &Matrix) -> Matrix;
}

impl GepEstimate for GepPair {
    fn dim(&self) -> usize {
        GepPair::dim(self)
    }

    fn apply_a(&self, u: &Matrix) -> Matrix {
        self.a().matmul(u)
    }

    fn apply_b(&self, u: &Matrix) -> Matrix {
        self.b().matmul(u)
    }
}

/// Unvalidated dense estimates `(Â, B̂)`; `B̂` may be singular.
#[derive(Debug, Clone)]
pub struct DenseEstimate {
    pub a: Matrix,
    pub b: Matrix,
}

impl DenseEstimate {
    /// Plug-in block covariance estimates from one batch.
    pub fn from_batch(batch: &MultiviewBatch, alpha: &[f64]) -> Result<Self> {
        check_alpha(alpha, batch.n_views())?;
        let x = batch.stacked().centered();
        let sigma = cov_of_centered(&x, &x);
        let dims = batch.dims();
        let mut a = sigma.clone();
        let mut b = Matrix::zeros(sigma.rows(), sigma.cols());
        let mut start = 0;
        for (i, &d) in dims.iter().enumerate() {
            let var = sigma.block(start, start, d, d);
            let ridge = &Matrix::identity(d).scale(alpha[i]) + &var.scale(1.0 - alpha[i]);
            b.set_block(start, start, &ridge);
            a.set_block(start, start, &Matrix::zeros(d, d));
            start += d;
        }
        Ok(Self { a, b })
    }
}

impl GepEstimate for DenseEstimate {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn apply_a(&self, u: &Matrix) -> Matrix {
        self.a.matmul(u)
    }

    fn apply_b(&self, u: &Matrix) -> Matrix {
        self.b.matmul(u)
    }
}

/// Data-backed estimates of the ridge-regularized multiview CCA pair.
///
/// `Â` has blocks `Cov(X_i, X_j)` off the diagonal and zero diagonal blocks;
/// `B̂` has diagonal blocks `α_i I + (1 − α_i) Var(X_i)`.
#[derive(Debug, Clone)]
pub struct BatchEstimate {
    centered: Vec<Matrix>,
    offsets: Vec<usize>,
    alpha: Vec<f64>,
    m: usize,
}

impl BatchEstimate {
    pub fn new(batch: &MultiviewBatch, alpha: &[f64]) -> Result<Self> {
        check_alpha(alpha, batch.n_views())?;
        let centered: Vec<Matrix> = batch.views().iter().map(Matrix::centered).collect();
        let mut offsets = Vec::with_capacity(centered.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for v in &centered {
            acc += v.cols();
            offsets.push(acc);
        }
        Ok(Self {
            centered,
            offsets,
            alpha: alpha.to_vec(),
            m: batch.n_samples(),
        })
    }

    fn split<'a>(&self, u: &'a Matrix) -> impl Iterator<Item = Matrix> + 'a {
        let offsets = self.offsets.clone();
        (0..offsets.len() - 1).map(move |i| u.row_block(offsets[i]..offsets[i + 1]))
    }

    /// Centered representations `Z̄_i = X̄_i U_i`.
    pub fn representations(&self, u: &Matrix) -> Vec<Matrix> {
        self.split(u)
            .zip(&self.centered)
            .map(|(ui, x)| x.matmul(&ui))
            .collect()
    }

    pub fn n_samples(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn check_dim(&self, u: &Matrix) -> Result<()> {
        if u.rows() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "weights have {} rows, data has dimension {}",
                u.rows(),
                self.dim()
            )));
        }
        Ok(())
    }
}

impl GepEstimate for BatchEstimate {
    fn dim(&self) -> usize {
        *self.offsets.last().expect("offsets are never empty")
    }

    fn apply_a(&self, u: &Matrix) -> Matrix {
        let z = self.representations(u);
        let mut total = Matrix::zeros(self.m, u.cols());
        for zi in &z {
            total += zi;
        }
        let scale = 1.0 / (self.m as f64 - 1.0);
        let blocks: Vec<Matrix> = self
            .centered
            .iter()
            .zip(&z)
            .map(|(x, zi)| x.t_matmul(&(&total - zi)).scale(scale))
            .collect();
        let refs: Vec<&Matrix> = blocks.iter().collect();
        Matrix::vstack(&refs)
    }

    fn apply_b(&self, u: &Matrix) -> Matrix {
        let scale = 1.0 / (self.m as f64 - 1.0);
        let blocks: Vec<Matrix> = self
            .split(u)
            .zip(&self.centered)
            .zip(&self.alpha)
            .map(|((ui, x), &a)| {
                let within = x.t_matmul(&x.matmul(&ui)).scale((1.0 - a) * scale);
                &ui.scale(a) + &within
            })
            .collect();
        let refs: Vec<&Matrix> = blocks.iter().collect();
        Matrix::vstack(&refs)
    }
}
