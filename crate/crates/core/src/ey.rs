//! The Eckhart-Young loss `tr(−2UᵀAU + (UᵀBU)²)` and its stochastic form.

use crate::data::{MultiviewBatch, WeightSet};
use crate::error::{Error, Result};
use crate::estimate::{BatchEstimate, GepEstimate};
use crate::gep::{GepPair, Spectrum};
use crate::linalg::{chol_inv_sqrt, sym_eig, Matrix};

/// Loss value, its three parts, and the gradient with respect to `U`.
///
/// `loss = −reward + norm_penalty + orth_penalty`.
#[derive(Debug, Clone)]
pub struct EyEvaluation {
    pub loss: f64,
    pub reward: f64,
    pub norm_penalty: f64,
    pub orth_penalty: f64,
    pub gradient: Matrix,
}

fn check_weights(dim: usize, u: &Matrix) -> Result<()> {
    if u.rows() != dim {
        return Err(Error::ShapeMismatch(format!(
            "weights have {} rows, problem has dimension {dim}",
            u.rows()
        )));
    }
    Ok(())
}

/// Loss and gradient with `Â`, `B̂` from `est` and the second `B̂′` from
/// `est2`. With `est2 = est` this is the deterministic loss of that pair.
///
/// The penalty is `⟨UᵀB̂U, UᵀB̂′U⟩_F`; its diagonal part is reported as the
/// norm penalty and the rest as the orthogonality penalty.
pub fn ey_evaluate<E1, E2>(est: &E1, est2: &E2, u: &Matrix) -> Result<EyEvaluation>
where
    E1: GepEstimate + ?Sized,
    E2: GepEstimate + ?Sized,
{
    check_weights(est.dim(), u)?;
    check_weights(est2.dim(), u)?;
    let au = est.apply_a(u);
    let bu = est.apply_b(u);
    let bu2 = est2.apply_b(u);
    let p = u.t_matmul(&bu);
    let p2 = u.t_matmul(&bu2);
    let reward = 2.0 * u.frobenius_dot(&au);
    let k = u.cols();
    let mut norm_penalty = 0.0;
    let mut orth_penalty = 0.0;
    for l in 0..k {
        for j in 0..k {
            let t = p[(l, j)] * p2[(l, j)];
            if l == j {
                norm_penalty += t;
            } else {
                orth_penalty += t;
            }
        }
    }
    let mut gradient = au.scale(-4.0);
    gradient.axpy(2.0, &bu.matmul(&p2));
    gradient.axpy(2.0, &bu2.matmul(&p));
    Ok(EyEvaluation {
        loss: -reward + norm_penalty + orth_penalty,
        reward,
        norm_penalty,
        orth_penalty,
        gradient,
    })
}

/// Exact loss and gradient `−4AU + 4BU(UᵀBU)` for a dense pair.
pub fn ey_loss(pair: &GepPair, u: &Matrix) -> Result<EyEvaluation> {
    ey_evaluate(pair, pair, u)
}

/// Unbiased estimate of the population loss from two independent batches.
///
/// The reward uses the first batch only; the penalty pairs the ridge
/// variance of the first batch with that of the second.
pub fn ey_loss_stochastic(
    batch: &MultiviewBatch,
    batch2: &MultiviewBatch,
    weights: &WeightSet,
    alpha: &[f64],
) -> Result<EyEvaluation> {
    weights.check_dims(&batch.dims())?;
    weights.check_dims(&batch2.dims())?;
    let est = BatchEstimate::new(batch, alpha)?;
    let est2 = BatchEstimate::new(batch2, alpha)?;
    ey_evaluate(&est, &est2, &weights.stacked())
}

/// One plain gradient step `U − lr·∇`, with `∇ = −4ÂU + 2B̂U(UᵀB̂′U) + 2B̂′U(UᵀB̂U)`.
///
/// This is `−2` times the ascent direction `2ÂU − B̂U(UᵀB̂′U) − B̂′U(UᵀB̂U)`.
pub fn ey_gradient_update<E1, E2>(u: &Matrix, est: &E1, est2: &E2, lr: f64) -> Result<Matrix>
where
    E1: GepEstimate + ?Sized,
    E2: GepEstimate + ?Sized,
{
    let eval = ey_evaluate(est, est2, u)?;
    let mut out = u.clone();
    out.axpy(-lr, &eval.gradient);
    Ok(out)
}

/// Solves the projected `K × K` problem `(ÛᵀAÛ, ÛᵀBÛ)` and maps back.
///
/// Returns Rayleigh values and `B`-orthonormal directions spanning `span(Û)`.
pub fn extract_spectrum(pair: &GepPair, u_hat: &Matrix) -> Result<(Spectrum, Matrix)> {
    check_weights(pair.dim(), u_hat)?;
    let (values, v) = projected_gep(&u_hat.t_matmul(&pair.a().matmul(u_hat)), &u_hat.t_matmul(&pair.b().matmul(u_hat)))?;
    Ok((Spectrum::new(values), u_hat.matmul(&v)))
}

/// Full eigendecomposition of a small pair `(P, Q)` with `Q` required to be
/// well conditioned. Returns descending values and `Q`-orthonormal vectors.
pub(crate) fn projected_gep(p: &Matrix, q: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let q = q.symmetrize();
    let d = q.diag().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let e = sym_eig(&q).map_err(|_| Error::SingularProjection)?;
    if d == 0.0 || e.eigenvalues.last().copied().unwrap_or(0.0) <= 1e-12 * d {
        return Err(Error::SingularProjection);
    }
    let s = chol_inv_sqrt(&q, 0.0).map_err(|_| Error::SingularProjection)?;
    let c = s.matmul(&p.symmetrize()).matmul(&s).symmetrize();
    let eig = sym_eig(&c)?;
    Ok((eig.eigenvalues, s.matmul(&eig.eigenvectors)))
}
