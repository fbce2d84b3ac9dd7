//! First-order optimizers and the two baseline update rules (SGHA and
//! γ-EigenGame). All rules here are written as minimization steps.

use crate::error::{Error, Result};
use crate::estimate::GepEstimate;
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    /// Heavy-ball momentum: `v ← μv + g`, `θ ← θ − lr·v`.
    Momentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn momentum() -> Self {
        OptimizerKind::Momentum { momentum: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
        }
    }
}

/// Optimizer state over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if !(config.lr > 0.0 && config.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be > 0, got {}", config.lr)));
        }
        match config.kind {
            OptimizerKind::Sgd => {}
            OptimizerKind::Momentum { momentum } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::InvalidParameter(format!("momentum {momentum} outside [0, 1)")));
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                    return Err(Error::InvalidParameter("invalid Adam hyperparameters".into()));
                }
            }
        }
        Ok(Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.t > 0 && self.m.len() != params.len() && !self.m.is_empty() {
            return Err(Error::ShapeMismatch("parameter count changed between steps".into()));
        }
        self.t += 1;
        let lr = self.config.lr;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Momentum { momentum } => {
                if self.m.is_empty() {
                    self.m = vec![0.0; params.len()];
                }
                for ((p, g), v) in params.iter_mut().zip(grads).zip(self.m.iter_mut()) {
                    *v = momentum * *v + g;
                    *p -= lr * *v;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.is_empty() {
                    self.m = vec![0.0; params.len()];
                    self.v = vec![0.0; params.len()];
                }
                let c1 = 1.0 - beta1.powi(self.t as i32);
                let c2 = 1.0 - beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mhat = self.m[i] / c1;
                    let vhat = self.v[i] / c2;
                    params[i] -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }

    /// Convenience wrapper for matrix-shaped parameters.
    pub fn step_matrix(&mut self, params: &mut Matrix, grads: &Matrix) -> Result<()> {
        if params.shape() != grads.shape() {
            return Err(Error::ShapeMismatch("gradient shape differs from parameters".into()));
        }
        self.step(params.as_mut_slice(), grads.as_slice())
    }
}

/// SGHA ascent direction `2ÂW − 2B̂W(WᵀÂ′W)`, with `Â, B̂` from `est` and
/// `Â′` from `est2`.
pub fn sgha_direction<E1, E2>(w: &Matrix, est: &E1, est2: &E2) -> Result<Matrix>
where
    E1: GepEstimate + ?Sized,
    E2: GepEstimate + ?Sized,
{
    check_rows(w, est.dim())?;
    check_rows(w, est2.dim())?;
    let aw = est.apply_a(w);
    let bw = est.apply_b(w);
    let lagrange = w.t_matmul(&est2.apply_a(w));
    let mut dir = aw.scale(2.0);
    dir.axpy(-2.0, &bw.matmul(&lagrange));
    Ok(dir)
}

/// One SGHA step `W + lr·(2ÂW − 2B̂W(WᵀÂ′W))`, i.e. a descent step on the
/// negated objective.
pub fn sgha_update<E1, E2>(w: &Matrix, est: &E1, est2: &E2, lr: f64) -> Result<Matrix>
where
    E1: GepEstimate + ?Sized,
    E2: GepEstimate + ?Sized,
{
    let mut out = w.clone();
    out.axpy(lr, &sgha_direction(w, est, est2)?);
    Ok(out)
}

fn check_rows(w: &Matrix, d: usize) -> Result<()> {
    if w.rows() != d {
        return Err(Error::ShapeMismatch(format!(
            "weights have {} rows, problem has dimension {d}",
            w.rows()
        )));
    }
    Ok(())
}

/// Auxiliary state for γ-EigenGame: running averages of `B̂w_j`.
#[derive(Debug, Clone)]
pub struct GammaEgState {
    /// Weight on the previous average, in `[0, 1)`.
    pub decay: f64,
    aux: Option<Matrix>,
}

impl Default for GammaEgState {
    fn default() -> Self {
        Self::new(0.9)
    }
}

impl GammaEgState {
    pub fn new(decay: f64) -> Self {
        Self { decay, aux: None }
    }

    pub fn aux(&self) -> Option<&Matrix> {
        self.aux.as_ref()
    }

    fn refresh(&mut self, bw: &Matrix) {
        match &mut self.aux {
            Some(aux) if aux.shape() == bw.shape() => {
                *aux = &aux.scale(self.decay) + &bw.scale(1.0 - self.decay);
            }
            _ => self.aux = Some(bw.clone()),
        }
    }
}

/// Per-column γ-EigenGame ascent directions.
///
/// For column `i`:
/// `(wᵢᵀB̂′wᵢ)Âwᵢ − (wᵢᵀÂwᵢ)B̂′wᵢ − Σ_{j<i} (wᵢᵀÂwⱼ)/(wⱼᵀ[Bwⱼ]) · ((wᵢᵀB̂′wᵢ)[Bwⱼ] − (wᵢᵀ[Bwⱼ])B̂′wᵢ)`
/// where `[Bwⱼ]` is the running average held in `state`, refreshed with
/// `B̂wⱼ` from `est` before use.
pub fn gamma_eg_direction<E1, E2>(
    w: &Matrix,
    state: &mut GammaEgState,
    est: &E1,
    est2: &E2,
) -> Result<Matrix>
where
    E1: GepEstimate + ?Sized,
    E2: GepEstimate + ?Sized,
{
    check_rows(w, est.dim())?;
    check_rows(w, est2.dim())?;
    let aw = est.apply_a(w);
    let bw = est.apply_b(w);
    let b2w = est2.apply_b(w);
    state.refresh(&bw);
    let aux = state.aux.as_ref().expect("refreshed above");
    let (d, k) = w.shape();
    let mut dir = Matrix::zeros(d, k);
    for i in 0..k {
        let wi = w.column(i);
        let awi = aw.column(i);
        let b2wi = b2w.column(i);
        let wbw = dot(&wi, &b2wi);
        let waw = dot(&wi, &awi);
        let mut g: Vec<f64> = awi.iter().zip(&b2wi).map(|(a, b)| wbw * a - waw * b).collect();
        for j in 0..i {
            let wj = w.column(j);
            let bwj = aux.column(j);
            let denom = dot(&wj, &bwj);
            if denom <= 0.0 {
                continue;
            }
            let coef = dot(&wi, &aw.column(j)) / denom;
            let wi_bwj = dot(&wi, &bwj);
            for r in 0..d {
                g[r] -= coef * (wbw * bwj[r] - wi_bwj * b2wi[r]);
            }
        }
        dir.set_column(i, &g);
    }
    Ok(dir)
}

/// Rescales every column to unit Euclidean norm.
pub fn retract_columns(w: &mut Matrix) -> Result<()> {
    for (j, n) in w.column_norms().into_iter().enumerate() {
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::ZeroColumn);
        }
        let col: Vec<f64> = w.column(j).iter().map(|x| x / n).collect();
        w.set_column(j, &col);
    }
    Ok(())
}

/// One γ-EigenGame step `wᵢ ← wᵢ + 2·lr·dirᵢ` followed by unit-norm
/// retraction of every column.
pub fn gamma_eg_update<E1, E2>(
    w: &Matrix,
    state: &mut GammaEgState,
    est: &E1,
    est2: &E2,
    lr: f64,
) -> Result<Matrix>
where
    E1: GepEstimate + ?Sized,
    E2: GepEstimate + ?Sized,
{
    let dir = gamma_eg_direction(w, state, est, est2)?;
    let mut out = w.clone();
    out.axpy(2.0 * lr, &dir);
    retract_columns(&mut out)?;
    Ok(out)
}
