//! Linear self-supervised learning: VICReg and Barlow Twins written through
//! covariance matrices, the CCA-basis decomposition of arbitrary weights, and
//! the collapse analysis of the `K = 2` matrix losses.

use crate::cca::cca_exact;
use crate::data::{MultiviewBatch, WeightSet};
use crate::error::{Error, Result};
use crate::linalg::{chol_inv_sqrt, empirical_cov, numerical_rank, principal_angles, svd, sym_eig, Matrix};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::synth::{self, Rng};

/// VICReg weights: `alpha` on the variance hinge, `beta` on the covariance
/// penalty, `gamma` on the invariance term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VicregParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl VicregParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { alpha, beta, gamma })
    }
}

impl Default for VicregParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// Plug-in covariance blocks of a two-view batch.
#[derive(Debug, Clone)]
pub struct TwoViewCov {
    pub s11: Matrix,
    pub s22: Matrix,
    pub s12: Matrix,
}

impl TwoViewCov {
    pub fn from_batch(batch: &MultiviewBatch) -> Result<Self> {
        if batch.n_views() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected two views, got {}",
                batch.n_views()
            )));
        }
        let (x1, x2) = (batch.view(0), batch.view(1));
        Ok(Self {
            s11: empirical_cov(x1, x1)?,
            s22: empirical_cov(x2, x2)?,
            s12: empirical_cov(x1, x2)?,
        })
    }

    fn check(&self, weights: &WeightSet) -> Result<()> {
        if weights.views().len() != 2 {
            return Err(Error::ShapeMismatch("expected two weight matrices".into()));
        }
        weights.check_dims(&[self.s11.rows(), self.s22.rows()])
    }

    fn var(&self, i: usize) -> &Matrix {
        if i == 0 {
            &self.s11
        } else {
            &self.s22
        }
    }
}

/// `l_VR(C) = β‖C‖²_F + Σ_k [α(1 − √C_kk)₊ − βC_kk² + γC_kk]` and its gradient
/// with respect to the symmetric argument `C`.
pub fn l_vr(c: &Matrix, p: &VicregParams) -> (f64, Matrix) {
    l_vr_impl(c, p, true)
}

/// With `clip_hinge = false` the hinge is replaced by `α(1 − √C_kk)`, which
/// agrees with it whenever `C_kk ≤ 1` and is smooth there.
fn l_vr_impl(c: &Matrix, p: &VicregParams, clip_hinge: bool) -> (f64, Matrix) {
    let k = c.rows();
    let mut value = p.beta * c.frobenius_dot(c);
    let mut g = c.scale(2.0 * p.beta);
    for j in 0..k {
        let ckk = c[(j, j)];
        let root = ckk.max(0.0).sqrt();
        let hinge_active = !clip_hinge || root < 1.0;
        let hinge_value = if hinge_active { p.alpha * (1.0 - root) } else { 0.0 };
        value += hinge_value - p.beta * ckk * ckk + p.gamma * ckk;
        // Hinge subgradient: 0 at √C = 1 and at C = 0.
        let hinge = if hinge_active && root > 0.0 {
            -p.alpha / (2.0 * root)
        } else {
            0.0
        };
        g[(j, j)] += hinge - 2.0 * p.beta * ckk + p.gamma;
    }
    (value, g)
}

/// Loss value plus gradients with respect to each view's weights.
#[derive(Debug, Clone)]
pub struct SslEvaluation {
    pub loss: f64,
    pub gradients: Vec<Matrix>,
}

impl SslEvaluation {
    pub fn gradient_norm(&self) -> f64 {
        self.gradients.iter().map(|g| g.frobenius_dot(g)).sum::<f64>().sqrt()
    }
}

/// VICReg loss `−2γ tr C¹² + Σᵢ l_VR(Cⁱⁱ)` of `Zᵢ = XᵢUᵢ`.
pub fn vicreg_loss(batch: &MultiviewBatch, weights: &WeightSet, params: &VicregParams) -> Result<SslEvaluation> {
    vicreg_loss_cov(&TwoViewCov::from_batch(batch)?, weights, params)
}

pub fn vicreg_loss_cov(cov: &TwoViewCov, weights: &WeightSet, params: &VicregParams) -> Result<SslEvaluation> {
    cov.check(weights)?;
    let (u1, u2) = (weights.view(0), weights.view(1));
    let s12u2 = cov.s12.matmul(u2);
    let s21u1 = cov.s12.t_matmul(u1);
    let c12 = u1.t_matmul(&s12u2);
    let mut loss = -2.0 * params.gamma * c12.trace();
    let mut gradients = Vec::with_capacity(2);
    for (i, u) in [u1, u2].into_iter().enumerate() {
        let su = cov.var(i).matmul(u);
        let (value, g) = l_vr(&u.t_matmul(&su).symmetrize(), params);
        loss += value;
        let cross = if i == 0 { &s12u2 } else { &s21u1 };
        let mut grad = su.matmul(&g).scale(2.0);
        grad.axpy(-2.0 * params.gamma, cross);
        gradients.push(grad);
    }
    Ok(SslEvaluation { loss, gradients })
}

/// Barlow Twins loss in constrained covariance form, with the unit-variance
/// constraint violations reported separately.
#[derive(Debug, Clone)]
pub struct BtEvaluation {
    pub loss: f64,
    pub gradients: Vec<Matrix>,
    /// Cross-covariance `C¹²`.
    pub c12: Matrix,
    /// `Cⁱⁱ_kk − 1` for each view.
    pub variance_residuals: Vec<Vec<f64>>,
}

/// `Σ_k (1 − C_kk)² + β Σ_{k≠l} C_kl²` and `dL/dC`.
pub fn bt_objective(c: &Matrix, beta: f64) -> (f64, Matrix) {
    let k = c.rows();
    let mut value = 0.0;
    let mut h = Matrix::zeros(k, c.cols());
    for a in 0..k {
        for b in 0..c.cols() {
            let x = c[(a, b)];
            if a == b {
                value += (1.0 - x) * (1.0 - x);
                h[(a, b)] = -2.0 * (1.0 - x);
            } else {
                value += beta * x * x;
                h[(a, b)] = 2.0 * beta * x;
            }
        }
    }
    (value, h)
}

pub fn barlow_twins_loss(batch: &MultiviewBatch, weights: &WeightSet, beta: f64) -> Result<BtEvaluation> {
    barlow_twins_loss_cov(&TwoViewCov::from_batch(batch)?, weights, beta)
}

pub fn barlow_twins_loss_cov(cov: &TwoViewCov, weights: &WeightSet, beta: f64) -> Result<BtEvaluation> {
    cov.check(weights)?;
    let (u1, u2) = (weights.view(0), weights.view(1));
    let s12u2 = cov.s12.matmul(u2);
    let s21u1 = cov.s12.t_matmul(u1);
    let c12 = u1.t_matmul(&s12u2);
    let (loss, h) = bt_objective(&c12, beta);
    let gradients = vec![s12u2.matmul_t(&h), s21u1.matmul(&h)];
    let variance_residuals = [u1, u2]
        .iter()
        .enumerate()
        .map(|(i, u)| {
            u.t_matmul(&cov.var(i).matmul(u))
                .diag()
                .iter()
                .map(|v| v - 1.0)
                .collect()
        })
        .collect();
    Ok(BtEvaluation {
        loss,
        gradients,
        c12,
        variance_residuals,
    })
}

/// Lagrange multipliers `L_k = (1 − C_kk)C_kk − β Σ_{l≠k} C_kl²` of the
/// constrained Barlow Twins problem.
#[derive(Debug, Clone)]
pub struct BtStationarityReport {
    pub c: Matrix,
    pub l: Vec<f64>,
}

pub fn bt_stationarity(c: &Matrix, beta: f64) -> BtStationarityReport {
    let k = c.rows();
    let l = (0..k)
        .map(|a| {
            let off: f64 = (0..k).filter(|&b| b != a).map(|b| c[(a, b)] * c[(a, b)]).sum();
            (1.0 - c[(a, a)]) * c[(a, a)] - beta * off
        })
        .collect();
    BtStationarityReport { c: c.clone(), l }
}

/// `Bᵢ = UᵢTᵢ` with `UᵢᵀVar(Xᵢ)Uᵢ = I_R` and `U₁ᵀCov(X₁, X₂)U₂ = Λ` diagonal.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub u: Vec<Matrix>,
    pub t: Vec<Matrix>,
    pub lambda: Vec<f64>,
    /// Rank of each view's weights in its covariance metric.
    pub view_ranks: Vec<usize>,
}

impl SubspaceDecomposition {
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }
}

const RANK_TOL: f64 = 1e-8;

/// Columns of `b` chosen greedily (largest residual first) that are
/// independent in the metric `s`, with coefficients `M` so that `b = b[:, I]·M`.
fn independent_columns(b: &Matrix, s: &Matrix, rank: usize) -> Result<(Vec<usize>, Matrix)> {
    let gram = b.t_matmul(&s.matmul(b)).symmetrize();
    let k = gram.rows();
    let mut chosen: Vec<usize> = Vec::new();
    // Pivoted Cholesky on the Gram matrix.
    let mut resid = gram.diag();
    let mut l = Matrix::zeros(k, k);
    for step in 0..rank {
        let (piv, _) = (0..k)
            .filter(|j| !chosen.contains(j))
            .map(|j| (j, resid[j]))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if piv == usize::MAX || resid[piv] <= 0.0 {
            return Err(Error::DegenerateData("weight columns lost rank".into()));
        }
        let d = resid[piv].sqrt();
        for j in 0..k {
            let mut v = gram[(j, piv)];
            for c in 0..step {
                v -= l[(j, c)] * l[(piv, c)];
            }
            l[(j, step)] = v / d;
        }
        for j in 0..k {
            resid[j] -= l[(j, step)] * l[(j, step)];
        }
        chosen.push(piv);
    }
    chosen.sort_unstable();
    let gi = gram.select_rows(&chosen).select_columns(&chosen);
    let rhs = gram.select_rows(&chosen);
    let m = crate::linalg::solve_spd(&gi, &rhs).map_err(|_| Error::DegenerateData("independent columns are singular".into()))?;
    Ok((chosen, m))
}

fn metric_rank(b: &Matrix, s: &Matrix) -> Result<usize> {
    let gram = b.t_matmul(&s.matmul(b)).symmetrize();
    let e = sym_eig(&gram)?;
    let top = e.eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(e.eigenvalues.iter().filter(|&&v| v > RANK_TOL * top).count())
}

/// Factors arbitrary two-view weights through a CCA basis of the subspace
/// they span, padding the lower-rank view with extra directions so both
/// views share the height `R = max rank`.
pub fn decompose_subspace(batch: &MultiviewBatch, weights: &WeightSet) -> Result<SubspaceDecomposition> {
    decompose_subspace_cov(&TwoViewCov::from_batch(batch)?, weights)
}

pub fn decompose_subspace_cov(cov: &TwoViewCov, weights: &WeightSet) -> Result<SubspaceDecomposition> {
    cov.check(weights)?;
    for i in 0..2 {
        if numerical_rank(cov.var(i), 1e-12) < cov.var(i).rows() {
            return Err(Error::DegenerateData(format!("view {} covariance is singular", i + 1)));
        }
    }
    let ranks = [metric_rank(weights.view(0), &cov.s11)?, metric_rank(weights.view(1), &cov.s22)?];
    let r = ranks[0].max(ranks[1]);
    if r == 0 {
        return Err(Error::RankZero);
    }
    let mut bbar = Vec::with_capacity(2);
    let mut coeffs = Vec::with_capacity(2);
    for (i, &rank) in ranks.iter().enumerate() {
        let b = weights.view(i);
        let s = cov.var(i);
        if rank == 0 {
            if r > s.rows() {
                return Err(Error::DegenerateData("subspace rank exceeds view dimension".into()));
            }
            bbar.push(top_eigenvectors(s, r)?);
            coeffs.push(Matrix::zeros(0, b.cols()));
            continue;
        }
        let (idx, m) = independent_columns(b, s, rank)?;
        let bi = b.select_columns(&idx);
        let full = if rank < r {
            if r > s.rows() {
                return Err(Error::DegenerateData("subspace rank exceeds view dimension".into()));
            }
            let sb = s.matmul(&bi);
            let inner = bi.t_matmul(&sb);
            let proj = sb.matmul(&crate::linalg::solve_spd(&inner, &sb.transpose())?);
            let resid = (s - &proj).symmetrize();
            let extra = top_eigenvectors(&resid, r - rank)?;
            Matrix::hstack(&[&bi, &extra])
        } else {
            bi
        };
        bbar.push(full);
        coeffs.push(m);
    }
    // CCA of the two R-dimensional representations.
    let var1 = bbar[0].t_matmul(&cov.s11.matmul(&bbar[0])).symmetrize();
    let var2 = bbar[1].t_matmul(&cov.s22.matmul(&bbar[1])).symmetrize();
    let c12 = bbar[0].t_matmul(&cov.s12.matmul(&bbar[1]));
    let w1 = chol_inv_sqrt(&var1, 0.0).map_err(|_| Error::DegenerateData("padded basis is singular".into()))?;
    let w2 = chol_inv_sqrt(&var2, 0.0).map_err(|_| Error::DegenerateData("padded basis is singular".into()))?;
    let dec = svd(&w1.matmul(&c12).matmul(&w2));
    let v = [w1.matmul(&dec.u), w2.matmul(&dec.v)];
    let vars = [var1, var2];
    let mut u = Vec::with_capacity(2);
    let mut t = Vec::with_capacity(2);
    for i in 0..2 {
        u.push(bbar[i].matmul(&v[i]));
        let tbar = v[i].t_matmul(&vars[i]);
        let ti = if ranks[i] == 0 {
            Matrix::zeros(r, weights.k())
        } else {
            tbar.columns(0..ranks[i]).matmul(&coeffs[i])
        };
        t.push(ti);
    }
    Ok(SubspaceDecomposition {
        u,
        t,
        lambda: dec.singular_values,
        view_ranks: ranks.to_vec(),
    })
}

fn top_eigenvectors(s: &Matrix, n: usize) -> Result<Matrix> {
    let e = sym_eig(&s.symmetrize())?;
    Ok(e.eigenvectors.columns(0..n))
}

/// Tolerances for [`check_cca_equivalence`].
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceTolerances {
    /// Largest allowed principal angle (radians).
    pub angle: f64,
    /// Largest allowed entry of `T¹ − T²` on rows with positive `λ`.
    pub t_rows: f64,
    /// Rows with `λ_r` above this count as positive.
    pub lambda_floor: f64,
    /// Weights whose loss gradient norm exceeds this are rejected.
    pub grad_norm: f64,
}

impl Default for EquivalenceTolerances {
    fn default() -> Self {
        Self {
            angle: 1e-2,
            t_rows: 1e-3,
            lambda_floor: 1e-6,
            grad_norm: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// Effective rank `R` of the representations.
    pub rank: usize,
    pub view_ranks: Vec<usize>,
    /// Principal angles per view between `span(Bᵢ)` and the top-R CCA weights.
    pub angles: Vec<Vec<f64>>,
    pub max_angle: f64,
    /// Largest `|T¹ − T²|` entry on rows with positive `λ`.
    pub t_row_gap: f64,
    pub lambda: Vec<f64>,
    pub gradient_norm: f64,
    pub pass: bool,
}

/// Checks that VICReg-optimal weights span a top CCA subspace and share `T`
/// between views on rows with positive correlation.
pub fn check_cca_equivalence(
    batch: &MultiviewBatch,
    weights: &WeightSet,
    params: &VicregParams,
    tol: &EquivalenceTolerances,
) -> Result<EquivalenceReport> {
    let cov = TwoViewCov::from_batch(batch)?;
    let gradient_norm = vicreg_loss_cov(&cov, weights, params)?.gradient_norm();
    if gradient_norm > tol.grad_norm {
        return Err(Error::NotConverged(gradient_norm));
    }
    let dec = decompose_subspace_cov(&cov, weights)?;
    let r = dec.rank();
    let (_, cca) = cca_exact(batch, r, &[0.0, 0.0])?;
    let mut angles = Vec::with_capacity(2);
    for i in 0..2 {
        let b = weights.view(i);
        let s = cov.var(i);
        let basis = if dec.view_ranks[i] == 0 {
            None
        } else {
            let (idx, _) = independent_columns(b, s, dec.view_ranks[i])?;
            Some(b.select_columns(&idx))
        };
        angles.push(match basis {
            Some(basis) => principal_angles(&basis, cca.view(i), Some(s))?,
            None => Vec::new(),
        });
    }
    let max_angle = angles.iter().flatten().fold(0.0_f64, |m, a| m.max(*a));
    let mut t_row_gap = 0.0_f64;
    for (row, &l) in dec.lambda.iter().enumerate() {
        if l > tol.lambda_floor {
            for c in 0..weights.k() {
                t_row_gap = t_row_gap.max((dec.t[0][(row, c)] - dec.t[1][(row, c)]).abs());
            }
        }
    }
    Ok(EquivalenceReport {
        rank: r,
        view_ranks: dec.view_ranks.clone(),
        pass: max_angle <= tol.angle && t_row_gap <= tol.t_rows,
        angles,
        max_angle,
        t_row_gap,
        lambda: dec.lambda,
        gradient_norm,
    })
}

/// Options for the gradient-based fits on data.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub steps: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

fn init_two_view(rng: &mut Rng, dims: &[usize], k: usize) -> Result<WeightSet> {
    WeightSet::new(dims.iter().map(|&d| synth::init_weights(rng, d, k)).collect())
}

fn apply_step(opt: &mut Optimizer, weights: &WeightSet, grads: &[Matrix]) -> Result<WeightSet> {
    let mut flat = weights.stacked();
    let refs: Vec<&Matrix> = grads.iter().collect();
    opt.step_matrix(&mut flat, &Matrix::vstack(&refs))?;
    WeightSet::from_stacked(&flat, &weights.dims())
}

/// Full-batch VICReg on two-view data from random initial weights. Returns
/// the weights and the loss before each step.
pub fn fit_vicreg(
    batch: &MultiviewBatch,
    k: usize,
    params: &VicregParams,
    opts: &FitOptions,
) -> Result<(WeightSet, Vec<f64>)> {
    let cov = TwoViewCov::from_batch(batch)?;
    let mut rng = synth::rng(opts.seed);
    let w = init_two_view(&mut rng, &batch.dims(), k)?;
    fit_vicreg_from(&cov, w, params, opts)
}

pub fn fit_vicreg_from(
    cov: &TwoViewCov,
    mut w: WeightSet,
    params: &VicregParams,
    opts: &FitOptions,
) -> Result<(WeightSet, Vec<f64>)> {
    let mut opt = Optimizer::new(opts.optimizer)?;
    let mut trace = Vec::with_capacity(opts.steps);
    for _ in 0..opts.steps {
        let eval = vicreg_loss_cov(cov, &w, params)?;
        trace.push(eval.loss);
        w = apply_step(&mut opt, &w, &eval.gradients)?;
        if w.views().iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok((w, trace))
}

/// Rescales weight columns so that every representation coordinate has unit
/// variance; columns with zero variance are left unchanged.
pub fn rescale_unit_variance(cov: &TwoViewCov, w: &WeightSet) -> Result<WeightSet> {
    let mut views = Vec::with_capacity(2);
    for (i, u) in w.views().iter().enumerate() {
        let var = u.t_matmul(&cov.var(i).matmul(u)).diag();
        let scaled = Matrix::from_fn(u.rows(), u.cols(), |r, c| {
            if var[c] > 0.0 {
                u[(r, c)] / var[c].sqrt()
            } else {
                u[(r, c)]
            }
        });
        views.push(scaled);
    }
    WeightSet::new(views)
}

/// Full-batch Barlow Twins: gradient steps on the constrained loss, each
/// followed by rescaling to unit representation variance.
pub fn fit_barlow_twins(
    batch: &MultiviewBatch,
    k: usize,
    beta: f64,
    opts: &FitOptions,
) -> Result<(WeightSet, Vec<f64>)> {
    let cov = TwoViewCov::from_batch(batch)?;
    let mut rng = synth::rng(opts.seed);
    let mut w = rescale_unit_variance(&cov, &init_two_view(&mut rng, &batch.dims(), k)?)?;
    let mut opt = Optimizer::new(opts.optimizer)?;
    let mut trace = Vec::with_capacity(opts.steps);
    for _ in 0..opts.steps {
        let eval = barlow_twins_loss_cov(&cov, &w, beta)?;
        trace.push(eval.loss);
        w = rescale_unit_variance(&cov, &apply_step(&mut opt, &w, &eval.gradients)?)?;
    }
    Ok((w, trace))
}

// ---------------------------------------------------------------------------
// Matrix forms in the CCA basis.

/// `⟨T¹, T²⟩_Λ = tr(T¹ᵀ diag(λ) T²)`.
pub fn lambda_inner(t1: &Matrix, t2: &Matrix, lambda: &[f64]) -> f64 {
    let mut s = 0.0;
    for (r, &l) in lambda.iter().enumerate() {
        s += l * crate::linalg::dot(t1.row(r), t2.row(r));
    }
    s
}

/// Generic two-view trace loss `−2⟨T¹, T²⟩_Λ + f(T¹) + f(T²)`.
pub fn trace_template_loss(t1: &Matrix, t2: &Matrix, lambda: &[f64], f: impl Fn(&Matrix) -> f64) -> f64 {
    -2.0 * lambda_inner(t1, t2, lambda) + f(t1) + f(t2)
}

fn scale_rows(t: &Matrix, lambda: &[f64]) -> Matrix {
    Matrix::from_fn(t.rows(), t.cols(), |r, c| lambda[r] * t[(r, c)])
}

/// Untied VICReg in the CCA basis:
/// `−2γ⟨T¹, T²⟩_Λ + l_VR(T¹ᵀT¹) + l_VR(T²ᵀT²)`, with gradients.
pub fn vr_matrix_loss_untied(
    t1: &Matrix,
    t2: &Matrix,
    lambda: &[f64],
    p: &VicregParams,
) -> (f64, Matrix, Matrix) {
    let (v1, g1) = l_vr(&t1.t_matmul(t1), p);
    let (v2, g2) = l_vr(&t2.t_matmul(t2), p);
    let loss = -2.0 * p.gamma * lambda_inner(t1, t2, lambda) + v1 + v2;
    let mut d1 = t1.matmul(&g1).scale(2.0);
    d1.axpy(-2.0 * p.gamma, &scale_rows(t2, lambda));
    let mut d2 = t2.matmul(&g2).scale(2.0);
    d2.axpy(-2.0 * p.gamma, &scale_rows(t1, lambda));
    (loss, d1, d2)
}

/// Tied VICReg in the CCA basis, `L̄(T; Λ) = L̄(T, T; Λ)`, with gradient.
pub fn vr_matrix_loss(t: &Matrix, lambda: &[f64], p: &VicregParams) -> (f64, Matrix) {
    vr_matrix_loss_impl(t, lambda, p, true)
}

fn vr_matrix_loss_impl(t: &Matrix, lambda: &[f64], p: &VicregParams, clip_hinge: bool) -> (f64, Matrix) {
    let (v, g) = l_vr_impl(&t.t_matmul(t), p, clip_hinge);
    let loss = -2.0 * p.gamma * lambda_inner(t, t, lambda) + 2.0 * v;
    let mut d = t.matmul(&g).scale(4.0);
    d.axpy(-4.0 * p.gamma, &scale_rows(t, lambda));
    (loss, d)
}

/// Tied Barlow Twins in the CCA basis with `C = TᵀΛT`, ignoring the
/// unit-column constraint (callers keep `T` on it); returns loss and
/// Euclidean gradient.
pub fn bt_matrix_loss(t: &Matrix, lambda: &[f64], beta: f64) -> (f64, Matrix) {
    let lt = scale_rows(t, lambda);
    let c = t.t_matmul(&lt).symmetrize();
    let (loss, h) = bt_objective(&c, beta);
    (loss, lt.matmul(&h).scale(2.0))
}

// ---------------------------------------------------------------------------
// Collapse thresholds.

fn check_unit_interval(lambdas: &[f64]) -> Result<()> {
    if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::InvalidLambdas(format!("{lambdas:?} not in [0, 1]")));
    }
    Ok(())
}

/// Returns `(μ, β_max)`: VICReg with `2β < γ(λ₁ − λ₂)μ²` collapses to rank 1.
///
/// `m_k* = min{1, α/(2γ(1 − λ_k))}`, `f_k(m) = m²γ(1 − λ_k) − mα`,
/// `μ = min{m₁*, −f₂(m₂*)/α}`, `β_max = γ(λ₁ − λ₂)μ²/2`.
pub fn vr_collapse_threshold(params: &VicregParams, lambda1: f64, lambda2: f64) -> Result<(f64, f64)> {
    check_unit_interval(&[lambda1, lambda2])?;
    if !(lambda1 < 1.0 && lambda1 >= lambda2) {
        return Err(Error::InvalidLambdas(format!(
            "need 1 > lambda1 >= lambda2 >= 0, got ({lambda1}, {lambda2})"
        )));
    }
    let (a, g) = (params.alpha, params.gamma);
    let m_star = |l: f64| (a / (2.0 * g * (1.0 - l))).min(1.0);
    let f = |m: f64, l: f64| m * m * g * (1.0 - l) - m * a;
    let m1 = m_star(lambda1);
    let m2 = m_star(lambda2);
    let mu = m1.min(-f(m2, lambda2) / a);
    Ok((mu, g * (lambda1 - lambda2) * mu * mu / 2.0))
}

/// `C(λ₁, λ₂) = 2(1 − λ₁)(λ₁ − λ₂) / ((3λ₁ − λ₂)(λ₁ + λ₂))`: tied Barlow Twins
/// with `β < C` collapses.
pub fn bt_collapse_constant(lambda1: f64, lambda2: f64) -> Result<f64> {
    check_unit_interval(&[lambda1, lambda2])?;
    if lambda1 < lambda2 || lambda1 + lambda2 <= 0.0 {
        return Err(Error::InvalidLambdas(format!(
            "need 1 >= lambda1 >= lambda2 >= 0 and lambda1 + lambda2 > 0, got ({lambda1}, {lambda2})"
        )));
    }
    Ok(2.0 * (1.0 - lambda1) * (lambda1 - lambda2) / ((3.0 * lambda1 - lambda2) * (lambda1 + lambda2)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollapseMethod {
    /// Tied VICReg with the given hinge and invariance weights; the grid
    /// varies `beta`.
    Vicreg { alpha: f64, gamma: f64 },
    BarlowTwins,
}

/// Restarts and step budget for the matrix-loss minimizations.
#[derive(Debug, Clone, Copy)]
pub struct ScanBudget {
    pub restarts: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ScanBudget {
    fn default() -> Self {
        Self {
            restarts: 20,
            steps: 20_000,
            lr: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollapseRun {
    pub t: Matrix,
    pub loss: f64,
    pub bottom_row_norm: f64,
    pub rank: usize,
    /// `T` is within `1e-4` of one of the four `(±1, ±1; 0, 0)` solutions.
    pub sign_solution: bool,
}

#[derive(Debug, Clone)]
pub struct CollapseRow {
    pub beta: f64,
    pub runs: Vec<CollapseRun>,
}

/// Bottom rows at or below this norm count as collapsed.
pub const COLLAPSE_TOL: f64 = 1e-4;

impl CollapseRow {
    pub fn all_collapsed(&self) -> bool {
        self.runs.iter().all(|r| r.bottom_row_norm <= COLLAPSE_TOL)
    }

    pub fn any_full_rank(&self) -> bool {
        self.runs.iter().any(|r| r.rank == 2)
    }

    pub fn all_sign_solutions(&self) -> bool {
        self.runs.iter().all(|r| r.sign_solution)
    }
}

/// Shrinks each column to norm at most one; never increases the VICReg
/// matrix loss.
pub fn shrink_columns(t: &mut Matrix) {
    for (j, n) in t.column_norms().into_iter().enumerate() {
        if n > 1.0 {
            let col: Vec<f64> = t.column(j).iter().map(|x| x / n).collect();
            t.set_column(j, &col);
        }
    }
}

/// Random `K × K` start with column norms uniform in `(0, 1]`.
fn random_start(rng: &mut Rng, k: usize) -> Matrix {
    let mut t = synth::gaussian_matrix(rng, k, k);
    for (j, n) in t.column_norms().into_iter().enumerate() {
        let target = synth::uniform(rng, 0.05, 1.0);
        let col: Vec<f64> = t.column(j).iter().map(|x| x * target / n.max(1e-300)).collect();
        t.set_column(j, &col);
    }
    t
}

/// Projected gradient descent on the tied VICReg matrix loss over columns of
/// norm at most one. On that set the hinge is smooth away from zero columns,
/// so the unclipped form is differentiated. Returns the best iterate seen.
pub fn minimize_vr_matrix(t0: &Matrix, lambda: &[f64], p: &VicregParams, steps: usize, lr: f64) -> (Matrix, f64) {
    let mut t = t0.clone();
    shrink_columns(&mut t);
    let (mut best_loss, _) = vr_matrix_loss(&t, lambda, p);
    let mut best = t.clone();
    for _ in 0..steps {
        let (_, g) = vr_matrix_loss_impl(&t, lambda, p, false);
        t.axpy(-lr, &g);
        shrink_columns(&mut t);
        let (loss, _) = vr_matrix_loss(&t, lambda, p);
        if loss <= best_loss {
            best_loss = loss;
            best = t.clone();
        }
    }
    (best, best_loss)
}

fn unit_columns(t: &mut Matrix) {
    for (j, n) in t.column_norms().into_iter().enumerate() {
        if n > 0.0 {
            let col: Vec<f64> = t.column(j).iter().map(|x| x / n).collect();
            t.set_column(j, &col);
        }
    }
}

/// Projected gradient descent on the tied Barlow Twins matrix loss over
/// unit-norm columns.
pub fn minimize_bt_matrix(t0: &Matrix, lambda: &[f64], beta: f64, steps: usize, lr: f64) -> (Matrix, f64) {
    let mut t = t0.clone();
    unit_columns(&mut t);
    for _ in 0..steps {
        let (_, g) = bt_matrix_loss(&t, lambda, beta);
        // Remove the radial part of each column's gradient.
        let mut tangent = g.clone();
        for j in 0..t.cols() {
            let tj = t.column(j);
            let gj = g.column(j);
            let radial = crate::linalg::dot(&tj, &gj);
            let proj: Vec<f64> = gj.iter().zip(&tj).map(|(gv, tv)| gv - radial * tv).collect();
            tangent.set_column(j, &proj);
        }
        t.axpy(-lr, &tangent);
        unit_columns(&mut t);
    }
    let (loss, _) = bt_matrix_loss(&t, lambda, beta);
    (t, loss)
}

fn is_sign_solution(t: &Matrix) -> bool {
    (0..t.cols()).all(|c| (t[(0, c)].abs() - 1.0).abs() <= COLLAPSE_TOL && t[(1, c)].abs() <= COLLAPSE_TOL)
}

/// Minimizes the `K = 2` matrix loss from many restarts at each `beta` and
/// reports rank and bottom-row size of each minimizer.
pub fn collapse_scan(method: CollapseMethod, lambdas: [f64; 2], betas: &[f64], budget: &ScanBudget) -> Vec<CollapseRow> {
    let mut rng = synth::rng(budget.seed);
    betas
        .iter()
        .map(|&beta| {
            let runs = (0..budget.restarts)
                .map(|_| {
                    let t0 = random_start(&mut rng, 2);
                    let (t, loss) = match method {
                        CollapseMethod::Vicreg { alpha, gamma } => {
                            let p = VicregParams { alpha, beta, gamma };
                            minimize_vr_matrix(&t0, &lambdas, &p, budget.steps, budget.lr)
                        }
                        CollapseMethod::BarlowTwins => minimize_bt_matrix(&t0, &lambdas, beta, budget.steps, budget.lr),
                    };
                    let bottom = t.row(1).iter().map(|x| x * x).sum::<f64>().sqrt();
                    let smax = svd(&t).singular_values[0];
                    let rank = if smax == 0.0 {
                        0
                    } else {
                        svd(&t).singular_values.iter().filter(|&&s| s > COLLAPSE_TOL).count()
                    };
                    CollapseRun {
                        sign_solution: is_sign_solution(&t),
                        bottom_row_norm: bottom,
                        rank,
                        loss,
                        t,
                    }
                })
                .collect();
            CollapseRow { beta, runs }
        })
        .collect()
}

/// `Φ_K(λ) = min_T L̄_VR(T; diag(λ))`, estimated by multi-restart descent
/// over `T` with column norms at most one.
pub fn vr_phi(lambda: &[f64], params: &VicregParams, budget: &ScanBudget) -> Result<f64> {
    check_unit_interval(lambda)?;
    let k = lambda.len();
    let mut rng = synth::rng(budget.seed);
    let mut best = f64::INFINITY;
    for _ in 0..budget.restarts.max(1) {
        let t0 = random_start(&mut rng, k);
        let (_, loss) = minimize_vr_matrix(&t0, lambda, params, budget.steps, budget.lr);
        best = best.min(loss);
    }
    Ok(best)
}

/// Closed form for `K = 1`: `Φ₁(λ) = 2α + 2f(m*)` with
/// `m* = min{1, α/(2γ(1 − λ))}` and `f(m) = m²γ(1 − λ) − mα`.
pub fn vr_phi_1d(lambda: f64, params: &VicregParams) -> f64 {
    let (a, g) = (params.alpha, params.gamma);
    let m = (a / (2.0 * g * (1.0 - lambda))).min(1.0);
    2.0 * a + 2.0 * (m * m * g * (1.0 - lambda) - m * a)
}
