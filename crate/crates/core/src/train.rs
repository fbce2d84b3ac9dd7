//! The mini-batch training loop: draw two independent batches, evaluate the
//! stochastic loss (or a baseline direction), take an optimizer step.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::{check_alpha, MultiviewBatch};
use crate::error::{Error, Result};
use crate::estimate::{BatchEstimate, GepEstimate};
use crate::ey::ey_evaluate;
use crate::gep::GepPair;
use crate::linalg::Matrix;
use crate::optim::{
    gamma_eg_direction, retract_columns, sgha_direction, GammaEgState, Optimizer, OptimizerConfig,
};
use crate::synth::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ey,
    Sgha,
    /// `decay` is the weight on the previous running average of `B̂w`.
    GammaEg { decay: f64 },
}

/// How the two batches of a step are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Shuffle once per epoch and pair each batch with the next one.
    #[default]
    Disjoint,
    /// Both batches drawn uniformly with replacement, independently.
    Iid,
}

#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    /// Exact `A`, `B` at every step (full-batch mode).
    Population(&'a GepPair),
    Data {
        batch: &'a MultiviewBatch,
        alpha: &'a [f64],
        batch_size: usize,
        sampling: Sampling,
    },
}

impl DataSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Population(p) => p.dim(),
            DataSource::Data { batch, .. } => batch.total_dim(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub k: usize,
    pub method: Method,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

/// Loss terms seen at one step, evaluated before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyRecord {
    pub step: usize,
    pub loss: f64,
    pub reward: f64,
    pub norm_penalty: f64,
    pub orth_penalty: f64,
}

pub struct Trainer<'a> {
    source: DataSource<'a>,
    config: TrainConfig,
    rng: Rng,
    weights: Matrix,
    optimizer: Optimizer,
    eg_state: GammaEgState,
    step: usize,
    perm: Vec<usize>,
    cursor: usize,
}

impl<'a> Trainer<'a> {
    /// Draws initial weights with i.i.d. `N(0, 1/D)` entries from the seed.
    pub fn new(source: DataSource<'a>, config: TrainConfig) -> Result<Self> {
        let mut rng = synth::rng(config.seed);
        let init = synth::init_weights(&mut rng, source.dim(), config.k);
        Self::build(source, config, rng, init)
    }

    pub fn with_weights(source: DataSource<'a>, config: TrainConfig, weights: Matrix) -> Result<Self> {
        let rng = synth::rng(config.seed);
        Self::build(source, config, rng, weights)
    }

    fn build(source: DataSource<'a>, config: TrainConfig, rng: Rng, mut weights: Matrix) -> Result<Self> {
        let d = source.dim();
        if config.k == 0 || config.k > d {
            return Err(Error::KTooLarge { k: config.k, dim: d });
        }
        if weights.shape() != (d, config.k) {
            return Err(Error::ShapeMismatch(format!(
                "initial weights are {:?}, expected ({d}, {})",
                weights.shape(),
                config.k
            )));
        }
        if let DataSource::Data {
            batch,
            alpha,
            batch_size,
            ..
        } = source
        {
            check_alpha(alpha, batch.n_views())?;
            if batch_size < 2 {
                return Err(Error::TooFewSamples(batch_size));
            }
            if batch_size > batch.n_samples() {
                return Err(Error::InvalidParameter(format!(
                    "batch size {batch_size} exceeds {} samples",
                    batch.n_samples()
                )));
            }
        }
        let eg_state = match config.method {
            Method::GammaEg { decay } => {
                if !(0.0..1.0).contains(&decay) {
                    return Err(Error::InvalidParameter(format!("decay {decay} outside [0, 1)")));
                }
                retract_columns(&mut weights)?;
                GammaEgState::new(decay)
            }
            _ => GammaEgState::default(),
        };
        Ok(Self {
            source,
            config,
            rng,
            optimizer: Optimizer::new(config.optimizer)?,
            weights,
            eg_state,
            step: 0,
            perm: Vec::new(),
            cursor: 0,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn into_weights(self) -> Matrix {
        self.weights
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Steps in one pass over the data (1 in population mode).
    pub fn steps_per_epoch(&self) -> usize {
        match self.source {
            DataSource::Population(_) => 1,
            DataSource::Data { batch, batch_size, .. } => (batch.n_samples() / batch_size).max(1),
        }
    }

    fn next_indices(&mut self) -> (Vec<usize>, Vec<usize>) {
        let DataSource::Data {
            batch,
            batch_size,
            sampling,
            ..
        } = self.source
        else {
            unreachable!("indices are only drawn for data sources");
        };
        let n = batch.n_samples();
        match sampling {
            Sampling::Iid => {
                let draw = |rng: &mut Rng| (0..batch_size).map(|_| rng.random_range(0..n)).collect();
                let b1 = draw(&mut self.rng);
                let b2 = draw(&mut self.rng);
                (b1, b2)
            }
            Sampling::Disjoint => {
                let nb = (n / batch_size).max(1);
                if self.cursor == 0 {
                    self.perm = (0..n).collect();
                    self.perm.shuffle(&mut self.rng);
                }
                let t = self.cursor;
                let t2 = (t + 1) % nb;
                let b1 = self.perm[t * batch_size..(t + 1) * batch_size].to_vec();
                let b2 = self.perm[t2 * batch_size..(t2 + 1) * batch_size].to_vec();
                self.cursor = (t + 1) % nb;
                (b1, b2)
            }
        }
    }

    /// Runs one step and returns the loss terms seen before the update.
    pub fn step(&mut self) -> Result<EyRecord> {
        let record = match self.source {
            DataSource::Population(pair) => self.advance(pair, pair)?,
            DataSource::Data { batch, alpha, .. } => {
                let (i1, i2) = self.next_indices();
                let e1 = BatchEstimate::new(&batch.select(&i1)?, alpha)?;
                let e2 = BatchEstimate::new(&batch.select(&i2)?, alpha)?;
                self.advance(&e1, &e2)?
            }
        };
        self.step += 1;
        Ok(record)
    }

    fn advance<E1, E2>(&mut self, est: &E1, est2: &E2) -> Result<EyRecord>
    where
        E1: GepEstimate + ?Sized,
        E2: GepEstimate + ?Sized,
    {
        let eval = ey_evaluate(est, est2, &self.weights)?;
        let record = EyRecord {
            step: self.step,
            loss: eval.loss,
            reward: eval.reward,
            norm_penalty: eval.norm_penalty,
            orth_penalty: eval.orth_penalty,
        };
        match self.config.method {
            Method::Ey => self.optimizer.step_matrix(&mut self.weights, &eval.gradient)?,
            Method::Sgha => {
                let dir = sgha_direction(&self.weights, est, est2)?;
                self.optimizer.step_matrix(&mut self.weights, &dir.scale(-1.0))?;
            }
            Method::GammaEg { .. } => {
                let dir = gamma_eg_direction(&self.weights, &mut self.eg_state, est, est2)?;
                self.optimizer.step_matrix(&mut self.weights, &dir.scale(-2.0))?;
                retract_columns(&mut self.weights)?;
            }
        }
        if !self.weights.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(record)
    }

    pub fn run(&mut self, steps: usize) -> Result<Vec<EyRecord>> {
        (0..steps).map(|_| self.step()).collect()
    }
}

/// Trains from seeded random initial weights for a fixed number of steps.
pub fn train(source: DataSource<'_>, config: TrainConfig, steps: usize) -> Result<(Matrix, Vec<EyRecord>)> {
    let mut trainer = Trainer::new(source, config)?;
    let trace = trainer.run(steps)?;
    Ok((trainer.into_weights(), trace))
}
