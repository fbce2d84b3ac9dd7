//! One training run: validate the configuration, train, and render the
//! metrics CSV and final weights.

use std::fmt::Write as _;

use clap::ValueEnum;
use gepey::cca::{build_gep_with_jitter, metric_pcc, metric_tcc, metric_tmcc};
use gepey::deep::{ey_representation_grad, train_deep, DeepConfig, DeepModel};
use gepey::optim::{OptimizerConfig, OptimizerKind};
use gepey::ssl::{barlow_twins_loss, fit_barlow_twins, fit_vicreg, vicreg_loss, FitOptions, VicregParams};
use gepey::train::{DataSource, Method, Sampling, TrainConfig, Trainer};
use gepey::{ey_loss, extract_spectrum, gep_solve, GepPair, Matrix, MultiviewBatch, Spectrum, WeightSet};

use crate::error::{CliError, Result};

pub const CSV_VERSION_LINE: &str = "# gep-ey metrics v1";
pub const CSV_HEADER: &str = "step,loss,reward,norm_penalty,orth_penalty,pcc,tcc,tmcc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ey,
    Sgha,
    Geigengame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Cca,
    Pls,
    Mcca,
    Gep,
    Vicreg,
    Bt,
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Disjoint,
    Iid,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: MethodArg,
    pub task: Task,
    pub k: usize,
    /// Ridge per view; defaults to 0 (1 for PLS).
    pub alpha: Option<Vec<f64>>,
    /// Defaults to the whole training set.
    pub batch_size: Option<usize>,
    pub lr: f64,
    pub optimizer: OptimizerArg,
    pub steps: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: u64,
    /// Added to `B` for the oracle and full-batch evaluation.
    pub jitter: f64,
    pub hidden: Vec<usize>,
    pub tied: bool,
    pub eval_every: usize,
    pub sampling: SamplingArg,
    pub vicreg: VicregParams,
    pub bt_beta: f64,
    pub eg_decay: f64,
}

impl RunConfig {
    pub fn new(method: MethodArg, task: Task, k: usize) -> Self {
        Self {
            method,
            task,
            k,
            alpha: None,
            batch_size: None,
            lr: 1e-2,
            optimizer: OptimizerArg::Sgd,
            steps: None,
            epochs: None,
            seed: 0,
            jitter: 0.0,
            hidden: Vec::new(),
            tied: false,
            eval_every: 1,
            sampling: SamplingArg::Disjoint,
            vicreg: VicregParams::default(),
            bt_beta: 0.005,
            eg_decay: 0.9,
        }
    }

    fn optimizer_config(&self) -> OptimizerConfig {
        let kind = match self.optimizer {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Momentum => OptimizerKind::momentum(),
            OptimizerArg::Adam => OptimizerKind::adam(),
        };
        OptimizerConfig { kind, lr: self.lr }
    }

    fn sampling(&self) -> Sampling {
        match self.sampling {
            SamplingArg::Disjoint => Sampling::Disjoint,
            SamplingArg::Iid => Sampling::Iid,
        }
    }
}

/// Metrics CSV plus named weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub weights: Vec<(String, Matrix)>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

struct Row {
    step: usize,
    loss: f64,
    reward: f64,
    norm_penalty: f64,
    orth_penalty: f64,
    pcc: f64,
    tcc: f64,
    tmcc: f64,
}

impl Row {
    fn loss_only(step: usize, loss: f64) -> Self {
        Self {
            step,
            loss,
            reward: f64::NAN,
            norm_penalty: f64::NAN,
            orth_penalty: f64::NAN,
            pcc: f64::NAN,
            tcc: f64::NAN,
            tmcc: f64::NAN,
        }
    }
}

fn render(rows: &[Row]) -> String {
    let mut s = String::new();
    s.push_str(CSV_VERSION_LINE);
    s.push('\n');
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        write!(s, "{}", r.step).unwrap();
        for v in [r.loss, r.reward, r.norm_penalty, r.orth_penalty, r.pcc, r.tcc, r.tmcc] {
            write!(s, ",{v:.16e}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn is_logged(step: usize, every: usize, last: usize) -> bool {
    step.is_multiple_of(every) || step == last
}

fn validate(config: &RunConfig, n_inputs: usize) -> Result<()> {
    if config.k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(invalid(format!("learning rate {} must be positive", config.lr)));
    }
    if !(config.jitter >= 0.0 && config.jitter.is_finite()) {
        return Err(invalid(format!("jitter {} must be >= 0", config.jitter)));
    }
    if config.eval_every == 0 {
        return Err(invalid("eval-every must be at least 1"));
    }
    match (config.steps, config.epochs) {
        (Some(_), Some(_)) => return Err(invalid("give either --steps or --epochs, not both")),
        (None, None) => return Err(invalid("one of --steps or --epochs is required")),
        _ => {}
    }
    if config.method != MethodArg::Ey && !matches!(config.task, Task::Cca | Task::Pls | Task::Mcca | Task::Gep) {
        return Err(invalid(format!("method {:?} only applies to linear GEP tasks", config.method)));
    }
    if config.task != Task::Deep && (!config.hidden.is_empty() || config.tied) {
        return Err(invalid("--hidden and --tied only apply to the deep task"));
    }
    if config.hidden.contains(&0) {
        return Err(invalid("hidden widths must be positive"));
    }
    if !(0.0..1.0).contains(&config.eg_decay) {
        return Err(invalid(format!("decay {} outside [0, 1)", config.eg_decay)));
    }
    if !(config.bt_beta > 0.0 && config.bt_beta.is_finite()) {
        return Err(invalid("Barlow Twins beta must be positive"));
    }
    let views_ok = match config.task {
        Task::Cca | Task::Pls | Task::Vicreg | Task::Bt | Task::Gep => n_inputs == 2,
        Task::Mcca | Task::Deep => n_inputs >= 2,
    };
    if !views_ok {
        let want = if config.task == Task::Gep { "the A and B matrices" } else { "one file per view" };
        return Err(invalid(format!("task {:?} needs {want}; got {n_inputs} inputs", config.task)));
    }
    Ok(())
}

fn resolve_alpha(config: &RunConfig, n_views: usize) -> Result<Vec<f64>> {
    let alpha = match (&config.alpha, config.task) {
        (Some(a), Task::Pls) if a.iter().any(|&v| v != 1.0) => {
            return Err(invalid("PLS fixes alpha = 1"));
        }
        (Some(a), _) => a.clone(),
        (None, Task::Pls) => vec![1.0; n_views],
        (None, _) => vec![0.0; n_views],
    };
    if alpha.len() != n_views {
        return Err(invalid(format!("{} alpha values for {n_views} views", alpha.len())));
    }
    if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(invalid("alpha values must lie in [0, 1]"));
    }
    Ok(alpha)
}

fn resolve_steps(config: &RunConfig, steps_per_epoch: usize) -> usize {
    match (config.steps, config.epochs) {
        (Some(s), _) => s,
        (None, Some(e)) => e * steps_per_epoch,
        (None, None) => unreachable!("validated"),
    }
}

fn resolve_batch_size(config: &RunConfig, n: usize) -> Result<usize> {
    let m = config.batch_size.unwrap_or(n);
    if m < 2 || m > n {
        return Err(invalid(format!("batch size {m} must lie in [2, {n}]")));
    }
    Ok(m)
}

/// Executes a run on in-memory inputs: views (or `A`, `B` for the GEP task),
/// plus optional held-out views used for TCC/TMCC.
pub fn run(config: &RunConfig, inputs: &[Matrix], val: Option<&[Matrix]>) -> Result<RunOutput> {
    validate(config, inputs.len())?;
    match config.task {
        Task::Gep => {
            if val.is_some() {
                return Err(invalid("--val does not apply to the GEP task"));
            }
            run_gep(config, &inputs[0], &inputs[1])
        }
        _ => {
            let batch = MultiviewBatch::new(inputs.to_vec())?;
            let eval = match val {
                Some(v) => {
                    let b = MultiviewBatch::new(v.to_vec())?;
                    if b.dims() != batch.dims() {
                        return Err(invalid("validation views differ in width from training views"));
                    }
                    b
                }
                None => batch.clone(),
            };
            match config.task {
                Task::Cca | Task::Pls | Task::Mcca => run_linear(config, &batch, &eval),
                Task::Vicreg | Task::Bt => run_ssl(config, &batch, &eval),
                Task::Deep => run_deep(config, &batch, &eval),
                Task::Gep => unreachable!(),
            }
        }
    }
}

fn method(config: &RunConfig) -> Method {
    match config.method {
        MethodArg::Ey => Method::Ey,
        MethodArg::Sgha => Method::Sgha,
        MethodArg::Geigengame => Method::GammaEg { decay: config.eg_decay },
    }
}

fn pcc_of(pair: &GepPair, u: &Matrix, oracle: &Spectrum) -> f64 {
    extract_spectrum(pair, u)
        .and_then(|(s, _)| metric_pcc(&s, oracle))
        .unwrap_or(f64::NAN)
}

fn correlation_metrics(eval: &MultiviewBatch, reps: Result<Vec<Matrix>>, k: usize) -> (f64, f64) {
    let Ok(z) = reps else {
        return (f64::NAN, f64::NAN);
    };
    let tcc = if eval.n_views() == 2 {
        metric_tcc(&z[0], &z[1], k).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    (tcc, metric_tmcc(&z).unwrap_or(f64::NAN))
}

fn full_row(step: usize, pair: &GepPair, u: &Matrix, oracle: &Spectrum) -> Result<Row> {
    let e = ey_loss(pair, u)?;
    Ok(Row {
        step,
        loss: e.loss,
        reward: e.reward,
        norm_penalty: e.norm_penalty,
        orth_penalty: e.orth_penalty,
        pcc: pcc_of(pair, u, oracle),
        tcc: f64::NAN,
        tmcc: f64::NAN,
    })
}

fn run_gep(config: &RunConfig, a: &Matrix, b: &Matrix) -> Result<RunOutput> {
    let pair = GepPair::with_jitter(a.clone(), b.clone(), config.jitter)?;
    let (oracle, _) = gep_solve(&pair, config.k)?;
    let train_cfg = TrainConfig {
        k: config.k,
        method: method(config),
        optimizer: config.optimizer_config(),
        seed: config.seed,
    };
    let mut trainer = Trainer::new(DataSource::Population(&pair), train_cfg)?;
    let steps = resolve_steps(config, 1);
    let mut rows = Vec::new();
    for t in 0..=steps {
        if is_logged(t, config.eval_every, steps) {
            rows.push(full_row(t, &pair, trainer.weights(), &oracle)?);
        }
        if t < steps {
            trainer.step()?;
        }
    }
    Ok(RunOutput {
        csv: render(&rows),
        weights: vec![("weights".into(), trainer.into_weights())],
    })
}

fn run_linear(config: &RunConfig, batch: &MultiviewBatch, eval: &MultiviewBatch) -> Result<RunOutput> {
    let alpha = resolve_alpha(config, batch.n_views())?;
    let pair = build_gep_with_jitter(batch, &alpha, config.jitter)?;
    let (oracle, _) = gep_solve(&pair, config.k)?;
    let batch_size = resolve_batch_size(config, batch.n_samples())?;
    let source = DataSource::Data {
        batch,
        alpha: &alpha,
        batch_size,
        sampling: config.sampling(),
    };
    let train_cfg = TrainConfig {
        k: config.k,
        method: method(config),
        optimizer: config.optimizer_config(),
        seed: config.seed,
    };
    let mut trainer = Trainer::new(source, train_cfg)?;
    let steps = resolve_steps(config, trainer.steps_per_epoch());
    let dims = batch.dims();
    let mut rows = Vec::new();
    for t in 0..=steps {
        if is_logged(t, config.eval_every, steps) {
            let u = trainer.weights();
            let mut row = full_row(t, &pair, u, &oracle)?;
            let reps = WeightSet::from_stacked(u, &dims)
                .and_then(|w| eval.project(&w))
                .map_err(CliError::from);
            (row.tcc, row.tmcc) = correlation_metrics(eval, reps, config.k);
            rows.push(row);
        }
        if t < steps {
            trainer.step()?;
        }
    }
    let weights = WeightSet::from_stacked(trainer.weights(), &dims)?;
    Ok(RunOutput {
        csv: render(&rows),
        weights: named_views(&weights),
    })
}

fn named_views(w: &WeightSet) -> Vec<(String, Matrix)> {
    w.views()
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("view{i}"), m.clone()))
        .collect()
}

fn run_ssl(config: &RunConfig, batch: &MultiviewBatch, eval: &MultiviewBatch) -> Result<RunOutput> {
    if config.alpha.is_some() || config.batch_size.is_some() {
        return Err(invalid("VICReg and Barlow Twins runs are full-batch without ridge"));
    }
    let steps = resolve_steps(config, 1);
    let opts = FitOptions {
        steps,
        optimizer: config.optimizer_config(),
        seed: config.seed,
    };
    let (w, trace, final_loss) = if config.task == Task::Vicreg {
        let (w, trace) = fit_vicreg(batch, config.k, &config.vicreg, &opts)?;
        let loss = vicreg_loss(batch, &w, &config.vicreg)?.loss;
        (w, trace, loss)
    } else {
        let (w, trace) = fit_barlow_twins(batch, config.k, config.bt_beta, &opts)?;
        let loss = barlow_twins_loss(batch, &w, config.bt_beta)?.loss;
        (w, trace, loss)
    };
    let mut rows: Vec<Row> = trace
        .iter()
        .enumerate()
        .filter(|(t, _)| is_logged(*t, config.eval_every, steps))
        .map(|(t, &l)| Row::loss_only(t, l))
        .collect();
    let pair = build_gep_with_jitter(batch, &[0.0, 0.0], config.jitter)?;
    let (oracle, _) = gep_solve(&pair, config.k)?;
    let mut last = Row::loss_only(steps, final_loss);
    last.pcc = pcc_of(&pair, &w.stacked(), &oracle);
    (last.tcc, last.tmcc) = correlation_metrics(eval, eval.project(&w).map_err(CliError::from), config.k);
    rows.push(last);
    Ok(RunOutput {
        csv: render(&rows),
        weights: named_views(&w),
    })
}

fn run_deep(config: &RunConfig, batch: &MultiviewBatch, eval: &MultiviewBatch) -> Result<RunOutput> {
    if config.alpha.as_ref().is_some_and(|a| a.iter().any(|&v| v != 0.0)) {
        return Err(invalid("deep runs use alpha = 0"));
    }
    let batch_size = resolve_batch_size(config, batch.n_samples())?;
    let steps = resolve_steps(config, (batch.n_samples() / batch_size).max(1));
    let deep_cfg = DeepConfig {
        hidden: config.hidden.clone(),
        k: config.k,
        tied: config.tied,
        optimizer: config.optimizer_config(),
        steps,
        batch_size,
        sampling: config.sampling(),
        seed: config.seed,
    };
    let (model, trace) = train_deep(batch, &deep_cfg)?;
    let mut rows: Vec<Row> = trace
        .iter()
        .filter(|r| is_logged(r.step, config.eval_every, steps))
        .map(|r| Row::loss_only(r.step, r.loss))
        .collect();
    let z = model.represent(batch)?;
    let mut last = Row::loss_only(steps, ey_representation_grad(&z, &z)?.loss);
    (last.tcc, last.tmcc) = correlation_metrics(eval, model.represent(eval).map_err(CliError::from), config.k);
    rows.push(last);
    Ok(RunOutput {
        csv: render(&rows),
        weights: named_layers(&model),
    })
}

fn named_layers(model: &DeepModel) -> Vec<(String, Matrix)> {
    let mut out = Vec::new();
    for (n, net) in model.nets().iter().enumerate() {
        let prefix = if model.is_tied() { "shared".to_string() } else { format!("view{n}") };
        for (l, layer) in net.layers().iter().enumerate() {
            out.push((format!("{prefix}_layer{l}_weight"), layer.weight.clone()));
            out.push((format!("{prefix}_layer{l}_bias"), Matrix::column_vector(&layer.bias).transpose()));
        }
    }
    out
}
