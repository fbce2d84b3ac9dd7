//! CCA, ridge-CCA, PLS and multiview CCA as generalized eigenvalue problems,
//! plus the evaluation metrics.

use crate::data::{check_alpha, MultiviewBatch, WeightSet};
use crate::error::{Error, Result};
use crate::estimate::{BatchEstimate, DenseEstimate};
use crate::ey::{ey_evaluate, projected_gep};
use crate::gep::{gep_solve, GepPair, Spectrum};
use crate::linalg::{empirical_cov, numerical_rank, svd, sym_eig, Matrix};

/// Builds `(A, B_α)` from the plug-in covariances of a batch.
pub fn build_gep(batch: &MultiviewBatch, alpha: &[f64]) -> Result<GepPair> {
    build_gep_with_jitter(batch, alpha, 0.0)
}

/// As [`build_gep`], adding `jitter·I` to `B_α`.
pub fn build_gep_with_jitter(batch: &MultiviewBatch, alpha: &[f64], jitter: f64) -> Result<GepPair> {
    let dense = DenseEstimate::from_batch(batch, alpha)?;
    GepPair::with_jitter(dense.a, dense.b, jitter)
}

/// Builds `(A, B_α)` from a joint covariance matrix over the stacked views.
pub fn build_gep_from_covariance(sigma: &Matrix, dims: &[usize], alpha: &[f64]) -> Result<GepPair> {
    if dims.len() < 2 {
        return Err(Error::TooFewViews(dims.len()));
    }
    check_alpha(alpha, dims.len())?;
    let d: usize = dims.iter().sum();
    if sigma.shape() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "covariance is {:?}, views need {d}x{d}",
            sigma.shape()
        )));
    }
    let mut a = sigma.clone();
    let mut b = Matrix::zeros(d, d);
    let mut start = 0;
    for (i, &di) in dims.iter().enumerate() {
        let var = sigma.block(start, start, di, di);
        b.set_block(start, start, &(&Matrix::identity(di).scale(alpha[i]) + &var.scale(1.0 - alpha[i])));
        a.set_block(start, start, &Matrix::zeros(di, di));
        start += di;
    }
    GepPair::new(a, b)
}

/// Exact top-K solution of the ridge-CCA problem of a batch.
///
/// The generalized eigenvectors satisfy `UᵀB_αU = I`; they are multiplied by
/// `√I` (`I` = number of views) so that with two views each view has
/// `U_iᵀ B_α^{ii} U_i = I`, i.e. unit-variance canonical variates when α = 0.
pub fn cca_exact(batch: &MultiviewBatch, k: usize, alpha: &[f64]) -> Result<(Spectrum, WeightSet)> {
    cca_exact_with_jitter(batch, k, alpha, 0.0)
}

pub fn cca_exact_with_jitter(
    batch: &MultiviewBatch,
    k: usize,
    alpha: &[f64],
    jitter: f64,
) -> Result<(Spectrum, WeightSet)> {
    let pair = build_gep_with_jitter(batch, alpha, jitter)?;
    let (spec, u) = gep_solve(&pair, k)?;
    let scale = (batch.n_views() as f64).sqrt();
    Ok((spec, WeightSet::from_stacked(&u.scale(scale), &batch.dims())?))
}

/// Gradient of the stochastic EY loss with respect to each view's weights,
/// computed from the data in `O(MDK)` time.
pub fn fast_linear_gradient(
    batch: &MultiviewBatch,
    batch2: &MultiviewBatch,
    weights: &WeightSet,
    alpha: &[f64],
) -> Result<Vec<Matrix>> {
    weights.check_dims(&batch.dims())?;
    weights.check_dims(&batch2.dims())?;
    let est = BatchEstimate::new(batch, alpha)?;
    let est2 = BatchEstimate::new(batch2, alpha)?;
    let eval = ey_evaluate(&est, &est2, &weights.stacked())?;
    Ok(WeightSet::from_stacked(&eval.gradient, &batch.dims())?.views().to_vec())
}

/// Top-K spectrum of the problem restricted to `span(blockdiag(U_i))`.
///
/// With α = 0 these are the multiview canonical correlations of the
/// representations `Z_i = X_i U_i`; the value vector is returned in full
/// (length `I·K`) and callers usually truncate to K.
pub fn projected_spectrum(batch: &MultiviewBatch, weights: &WeightSet, alpha: &[f64]) -> Result<Spectrum> {
    weights.check_dims(&batch.dims())?;
    let dense = DenseEstimate::from_batch(batch, alpha)?;
    let blocks: Vec<&Matrix> = weights.views().iter().collect();
    let ubar = Matrix::block_diag(&blocks);
    let p = ubar.t_matmul(&dense.a.matmul(&ubar));
    let q = ubar.t_matmul(&dense.b.matmul(&ubar));
    let (values, _) = projected_gep(&p, &q)?;
    Ok(Spectrum::new(values))
}

/// Proportion of correlation captured: `Σ max(ρ_k, 0) / Σ ρ*_k`.
pub fn metric_pcc(learned: &Spectrum, oracle: &Spectrum) -> Result<f64> {
    if learned.len() != oracle.len() {
        return Err(Error::ShapeMismatch(format!(
            "learned spectrum has {} values, oracle {}",
            learned.len(),
            oracle.len()
        )));
    }
    let denom = oracle.sum();
    if denom <= 0.0 {
        return Err(Error::ZeroOracle);
    }
    Ok(learned.values().iter().map(|r| r.max(0.0)).sum::<f64>() / denom)
}

/// `V^{+1/2}` for a PSD matrix, dropping directions with negligible variance.
fn whitener(var: &Matrix) -> Result<Matrix> {
    let e = sym_eig(&var.symmetrize())?;
    let top = e.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let q = &e.eigenvectors;
    let kept: Vec<usize> = (0..e.eigenvalues.len())
        .filter(|&j| top > 0.0 && e.eigenvalues[j] > 1e-12 * top)
        .collect();
    Ok(Matrix::from_fn(q.rows(), kept.len(), |i, c| {
        q[(i, kept[c])] / e.eigenvalues[kept[c]].sqrt()
    }))
}

/// Canonical correlations between two sets of variables (descending).
pub fn canonical_correlations(z1: &Matrix, z2: &Matrix) -> Result<Vec<f64>> {
    let v1 = empirical_cov(z1, z1)?;
    let v2 = empirical_cov(z2, z2)?;
    let c12 = empirical_cov(z1, z2)?;
    let w1 = whitener(&v1)?;
    let w2 = whitener(&v2)?;
    if w1.cols() == 0 || w2.cols() == 0 {
        return Ok(Vec::new());
    }
    let t = w1.t_matmul(&c12).matmul(&w2);
    Ok(svd(&t).singular_values.iter().map(|s| s.min(1.0)).collect())
}

/// Total correlation captured: sum of the top-K canonical correlations
/// between two representations.
pub fn metric_tcc(z1: &Matrix, z2: &Matrix, k: usize) -> Result<f64> {
    Ok(canonical_correlations(z1, z2)?.iter().take(k).sum())
}

/// Pearson correlation of two columns; zero when either has no variance.
fn column_correlation(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Total multiview correlation captured: for each component, the average
/// correlation over ordered view pairs, summed over components.
pub fn metric_tmcc(reps: &[Matrix]) -> Result<f64> {
    if reps.len() < 2 {
        return Err(Error::TooFewViews(reps.len()));
    }
    let m = reps[0].rows();
    let k = reps[0].cols();
    if reps.iter().any(|z| z.rows() != m || z.cols() != k) {
        return Err(Error::ShapeMismatch("representations differ in shape".into()));
    }
    if m < 2 {
        return Err(Error::TooFewSamples(m));
    }
    let n = reps.len();
    let mut total = 0.0;
    for c in 0..k {
        let cols: Vec<Vec<f64>> = reps.iter().map(|z| z.column(c)).collect();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += column_correlation(&cols[i], &cols[j]);
                }
            }
        }
        total += s / (n * (n - 1)) as f64;
    }
    Ok(total)
}

/// Outcome of comparing projected and original multiview spectra.
#[derive(Debug, Clone)]
pub struct InterlaceReport {
    pub original: Vec<f64>,
    pub projected: Vec<f64>,
    /// `original_k − projected_k`; non-negative when interlacing holds.
    pub gaps: Vec<f64>,
    pub holds: bool,
    /// All gaps below `1e-6`: the projection spans a top CCA subspace.
    pub equality: bool,
}

/// Checks `MCCA_K(X_i P_i) ≤ MCCA_K(X_i)` element-wise, with K the smallest
/// projector width.
pub fn interlace_check(batch: &MultiviewBatch, projectors: &[Matrix]) -> Result<InterlaceReport> {
    if projectors.len() != batch.n_views() {
        return Err(Error::ShapeMismatch("one projector per view required".into()));
    }
    for (p, d) in projectors.iter().zip(batch.dims()) {
        if p.rows() != d {
            return Err(Error::ShapeMismatch("projector height differs from view width".into()));
        }
        if numerical_rank(p, 1e-10) < p.cols() {
            return Err(Error::RankDeficient);
        }
    }
    let k = projectors.iter().map(Matrix::cols).min().unwrap_or(0);
    let alpha = vec![0.0; batch.n_views()];
    let pair = build_gep(batch, &alpha)?;
    let (orig, _) = gep_solve(&pair, k)?;
    let projected_views: Vec<Matrix> = batch
        .views()
        .iter()
        .zip(projectors)
        .map(|(x, p)| x.matmul(p))
        .collect();
    let projected_batch = MultiviewBatch::new(projected_views)?;
    let (proj, _) = gep_solve(&build_gep(&projected_batch, &alpha).map_err(|_| Error::RankDeficient)?, k)?;
    let gaps: Vec<f64> = orig.values().iter().zip(proj.values()).map(|(o, p)| o - p).collect();
    Ok(InterlaceReport {
        holds: gaps.iter().all(|&g| g >= -1e-8),
        equality: gaps.iter().all(|&g| g.abs() < 1e-6),
        original: orig.values().to_vec(),
        projected: proj.values().to_vec(),
        gaps,
    })
}
