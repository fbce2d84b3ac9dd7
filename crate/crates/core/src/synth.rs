//! Seeded random matrices and problem instances.

use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::gep::GepPair;
use crate::linalg::{cholesky, orthonormal_columns, Matrix};

/// The generator used everywhere a seed is accepted.
pub type Rng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Haar-distributed orthogonal matrix (Gram-Schmidt of a Gaussian matrix).
pub fn random_orthogonal(rng: &mut Rng, n: usize) -> Matrix {
    orthonormal_columns(&gaussian_matrix(rng, n, n))
}

/// `Q diag(e) Qᵀ` with a random orthogonal `Q` and the given eigenvalues.
pub fn with_spectrum(rng: &mut Rng, eigenvalues: &[f64]) -> Matrix {
    let q = random_orthogonal(rng, eigenvalues.len());
    let scaled = Matrix::from_fn(q.rows(), q.cols(), |i, j| q[(i, j)] * eigenvalues[j]);
    scaled.matmul_t(&q).symmetrize()
}

/// Random SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_spd(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    let e: Vec<f64> = (0..n).map(|_| uniform(rng, lo, hi)).collect();
    with_spectrum(rng, &e)
}

/// A GEP whose generalized eigenvalues are exactly `lambdas` (any order), with
/// `B` random SPD with spectrum in `[b_lo, b_hi]`.
pub fn gep_with_spectrum(rng: &mut Rng, lambdas: &[f64], b_lo: f64, b_hi: f64) -> GepPair {
    let d = lambdas.len();
    let b = random_spd(rng, d, b_lo, b_hi);
    let l = cholesky(&b).expect("random SPD matrix factorizes");
    let core = with_spectrum(rng, lambdas);
    let a = l.matmul(&core).matmul_t(&l).symmetrize();
    GepPair::new(a, b).expect("constructed pair is valid")
}

/// Weight initialization: i.i.d. `N(0, 1/D)` entries.
pub fn init_weights(rng: &mut Rng, d: usize, k: usize) -> Matrix {
    let s = 1.0 / (d as f64).sqrt();
    Matrix::from_fn(d, k, |_, _| s * normal(rng))
}
