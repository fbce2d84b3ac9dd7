//! Synthetic multiview data with known canonical correlations.

use gepey::linalg::Matrix;
use gepey::synth::{self, Rng};
use gepey::MultiviewBatch;

use crate::error::{CliError, Result};

/// Generated views and the population canonical correlations they were
/// built with (descending).
#[derive(Debug, Clone)]
pub struct Generated {
    pub batch: MultiviewBatch,
    pub spectrum: Vec<f64>,
}

fn check_rho(rho: &[f64], dims: &[usize]) -> Result<()> {
    if rho.is_empty() {
        return Err(CliError::InvalidRho("at least one correlation is required".into()));
    }
    if let Some(r) = rho.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(CliError::InvalidRho(format!("{r} is outside [0, 1)")));
    }
    if rho.windows(2).any(|w| w[0] < w[1]) {
        return Err(CliError::InvalidRho("correlations must be in descending order".into()));
    }
    let dmin = dims.iter().copied().min().unwrap_or(0);
    if rho.len() > dmin {
        return Err(CliError::InvalidRho(format!(
            "{} correlations but the smallest view has {dmin} columns",
            rho.len()
        )));
    }
    Ok(())
}

/// Multiview Gaussian data whose pairwise population canonical correlations
/// are `rho` (and zero beyond).
///
/// Each view starts from unit-variance coordinates whose first `K` entries
/// are `√ρ_k z_k + √(1 − ρ_k) e_k` for a latent `z` shared by all views; the
/// rest is independent noise. Each view is then rotated by its own random
/// orthogonal matrix, so its covariance stays white.
pub fn gen_gaussian(dims: &[usize], rho: &[f64], n: usize, seed: u64) -> Result<Generated> {
    if dims.len() < 2 {
        return Err(CliError::ConfigInvalid("need at least two views".into()));
    }
    check_rho(rho, dims)?;
    let mut rng = synth::rng(seed);
    let k = rho.len();
    let z = synth::gaussian_matrix(&mut rng, n, k);
    let mut views = Vec::with_capacity(dims.len());
    for &d in dims {
        let mut u = synth::gaussian_matrix(&mut rng, n, d);
        for r in 0..n {
            for (j, &p) in rho.iter().enumerate() {
                u[(r, j)] = p.sqrt() * z[(r, j)] + (1.0 - p).sqrt() * u[(r, j)];
            }
        }
        let q = synth::random_orthogonal(&mut rng, d);
        views.push(u.matmul(&q));
    }
    Ok(Generated {
        batch: MultiviewBatch::new(views)?,
        spectrum: rho.to_vec(),
    })
}

/// Variances of the latent signal: `4, 2, 1, 1/2, …`.
pub fn augmented_signal_variances(d: usize) -> Vec<f64> {
    (0..d).map(|j| 4.0 * 0.5_f64.powi(j as i32)).collect()
}

/// Two views produced by independent random augmentations of shared data.
///
/// `X⁰ ~ N(0, Σ₀)` with `Σ₀` having eigenvalues from
/// [`augmented_signal_variances`] in a random basis. Each view applies its
/// own per-sample augmentation `g(x) = x + s(Gx/√D + e)`, where `G` has
/// i.i.d. standard normal entries and `e ~ N(0, I)`. Since
/// `Gx ~ N(0, ‖x‖²I)`, the draw is made in that form. Population canonical
/// correlations are `σ_d / (σ_d + s²(tr Σ₀/D + 1))`.
pub fn gen_augmented(d: usize, n: usize, noise: f64, seed: u64) -> Result<Generated> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::ConfigInvalid(format!("noise scale {noise} must be >= 0")));
    }
    if d == 0 {
        return Err(CliError::ConfigInvalid("dimension must be positive".into()));
    }
    let mut rng = synth::rng(seed);
    let sigma = augmented_signal_variances(d);
    let q = synth::random_orthogonal(&mut rng, d);
    let roots: Vec<f64> = sigma.iter().map(|s| s.sqrt()).collect();
    let x0 = synth::gaussian_matrix(&mut rng, n, d)
        .matmul(&Matrix::from_diag(&roots))
        .matmul_t(&q);
    let augment = |rng: &mut Rng| {
        let mut x = x0.clone();
        for r in 0..n {
            let norm2: f64 = x0.row(r).iter().map(|v| v * v).sum();
            let spread = noise * (norm2 / d as f64 + 1.0).sqrt();
            for v in x.row_mut(r) {
                *v += spread * synth::normal(rng);
            }
        }
        x
    };
    let x1 = augment(&mut rng);
    let x2 = augment(&mut rng);
    let shrink = noise * noise * (sigma.iter().sum::<f64>() / d as f64 + 1.0);
    let spectrum = sigma.iter().map(|s| s / (s + shrink)).collect();
    Ok(Generated {
        batch: MultiviewBatch::new(vec![x1, x2])?,
        spectrum,
    })
}
