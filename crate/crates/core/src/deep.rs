//! Small multilayer perceptrons trained with the stochastic EY loss on their
//! outputs. Backpropagation is written by hand.

use rand::seq::SliceRandom;

use crate::cca::projected_spectrum;
use crate::data::{MultiviewBatch, WeightSet};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::{Optimizer, OptimizerConfig};
use crate::synth::{self, Rng};
use crate::train::Sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer `act(x W + b)`, with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer gradients, shaped like the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrad {
    fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| Matrix::zeros(l.weight.rows(), l.weight.cols())).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn add(&mut self, other: &MlpGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    pub output: Matrix,
}

impl Mlp {
    /// Checks that shapes chain and that the last layer is linear.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].weight.cols() != pair[1].weight.rows() {
                return Err(Error::ShapeMismatch("layer widths do not chain".into()));
            }
        }
        for l in &layers {
            if l.bias.len() != l.weight.cols() {
                return Err(Error::ShapeMismatch("bias length differs from layer width".into()));
            }
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(Error::InvalidParameter("the final layer must be linear".into()));
        }
        Ok(Self { layers })
    }

    /// ReLU hidden layers and a linear output; `widths = [in, h₁, …, out]`.
    /// Weights are `N(0, 1/fan_in)`, biases zero.
    pub fn random(rng: &mut Rng, widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter("need input and output widths".into()));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (widths[i], widths[i + 1]);
                let s = 1.0 / (fan_in as f64).sqrt();
                Layer {
                    weight: Matrix::from_fn(fan_in, fan_out, |_, _| s * synth::normal(rng)),
                    bias: vec![0.0; fan_out],
                    activation: if i + 1 == n {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Self::new(layers)
    }

    /// A single linear layer with zero bias.
    pub fn linear(weight: Matrix) -> Self {
        let bias = vec![0.0; weight.cols()];
        Self {
            layers: vec![Layer {
                weight,
                bias,
                activation: Activation::Identity,
            }],
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let mut z = h.matmul(&l.weight);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&l.bias) {
                    *v += b;
                }
            }
            let out = z.map(|v| l.activation.apply(v));
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: h,
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.output)
    }

    /// Gradients of a scalar loss given `d_out = dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Matrix) -> Result<MlpGrad> {
        if d_out.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch("output gradient shape".into()));
        }
        let mut grad = MlpGrad::zeros_like(self);
        let mut delta = d_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[i];
            let dz = Matrix::from_fn(pre.rows(), pre.cols(), |r, c| delta[(r, c)] * l.activation.derivative(pre[(r, c)]));
            grad.weights[i] = cache.inputs[i].t_matmul(&dz);
            grad.biases[i] = (0..dz.cols()).map(|c| (0..dz.rows()).map(|r| dz[(r, c)]).sum()).collect();
            if i > 0 {
                delta = dz.matmul_t(&l.weight);
            }
        }
        Ok(grad)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.rows() * l.weight.cols() + l.bias.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::ShapeMismatch("flat parameter length".into()));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            let n = l.weight.rows() * l.weight.cols();
            l.weight.as_mut_slice().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
            let b = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + b]);
            pos += b;
        }
        Ok(())
    }
}

/// Per-view networks, or a single network shared by every view.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepModel {
    nets: Vec<Mlp>,
    tied: bool,
}

impl DeepModel {
    pub fn untied(nets: Vec<Mlp>) -> Result<Self> {
        if nets.len() < 2 {
            return Err(Error::TooFewViews(nets.len()));
        }
        let k = nets[0].output_dim();
        if nets.iter().any(|n| n.output_dim() != k) {
            return Err(Error::ShapeMismatch("networks have different output widths".into()));
        }
        Ok(Self { nets, tied: false })
    }

    pub fn tied(net: Mlp) -> Self {
        Self {
            nets: vec![net],
            tied: true,
        }
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    pub fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn net_for_view(&self, i: usize) -> &Mlp {
        if self.tied {
            &self.nets[0]
        } else {
            &self.nets[i]
        }
    }

    fn check_views(&self, batch: &MultiviewBatch) -> Result<()> {
        if !self.tied && self.nets.len() != batch.n_views() {
            return Err(Error::ShapeMismatch(format!(
                "{} networks for {} views",
                self.nets.len(),
                batch.n_views()
            )));
        }
        Ok(())
    }

    pub fn represent(&self, batch: &MultiviewBatch) -> Result<Vec<Matrix>> {
        self.check_views(batch)?;
        (0..batch.n_views())
            .map(|i| self.net_for_view(i).predict(batch.view(i)))
            .collect()
    }

    fn forward_all(&self, batch: &MultiviewBatch) -> Result<Vec<ForwardCache>> {
        self.check_views(batch)?;
        (0..batch.n_views())
            .map(|i| self.net_for_view(i).forward(batch.view(i)))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.nets.iter().map(Mlp::n_params).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.nets.iter().flat_map(Mlp::to_flat).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::ShapeMismatch("flat parameter length".into()));
        }
        let mut pos = 0;
        for n in &mut self.nets {
            let c = n.n_params();
            n.set_flat(&flat[pos..pos + c])?;
            pos += c;
        }
        Ok(())
    }
}

/// EY loss terms of representations and `dL/dZ` for each batch.
#[derive(Debug, Clone)]
pub struct RepresentationGrad {
    pub loss: f64,
    pub d_z: Vec<Matrix>,
    pub d_z2: Vec<Matrix>,
}

/// Stochastic EY loss (α = 0) of representations `Z` and `Z′` and its
/// gradient with respect to each representation matrix.
pub fn ey_representation_grad(z: &[Matrix], z2: &[Matrix]) -> Result<RepresentationGrad> {
    if z.len() != z2.len() || z.len() < 2 {
        return Err(Error::TooFewViews(z.len().min(z2.len())));
    }
    let m = z[0].rows();
    let m2 = z2[0].rows();
    if m < 2 || m2 < 2 {
        return Err(Error::TooFewSamples(m.min(m2)));
    }
    let k = z[0].cols();
    if z.iter().chain(z2).any(|zi| zi.cols() != k) || z.iter().any(|zi| zi.rows() != m) || z2.iter().any(|zi| zi.rows() != m2) {
        return Err(Error::ShapeMismatch("representations differ in shape".into()));
    }
    let zc: Vec<Matrix> = z.iter().map(Matrix::centered).collect();
    let zc2: Vec<Matrix> = z2.iter().map(Matrix::centered).collect();
    let s = 1.0 / (m as f64 - 1.0);
    let s2 = 1.0 / (m2 as f64 - 1.0);
    let mut total = Matrix::zeros(m, k);
    for zi in &zc {
        total += zi;
    }
    let mut v = Matrix::zeros(k, k);
    for zi in &zc {
        v += &zi.t_matmul(zi).scale(s);
    }
    let mut v2 = Matrix::zeros(k, k);
    for zi in &zc2 {
        v2 += &zi.t_matmul(zi).scale(s2);
    }
    // tr Ĉ = Σ_{i≠j} tr Cov(Zᵢ, Zⱼ) = (‖ΣZ̄ᵢ‖² − Σ‖Z̄ᵢ‖²)/(M − 1)
    let trace_c = (total.frobenius_dot(&total) - zc.iter().map(|zi| zi.frobenius_dot(zi)).sum::<f64>()) * s;
    let loss = -2.0 * trace_c + v.frobenius_dot(&v2);
    let d_z = zc
        .iter()
        .map(|zi| {
            let mut g = (&total - zi).scale(-4.0 * s);
            g.axpy(2.0 * s, &zi.matmul(&v2));
            g
        })
        .collect();
    let d_z2 = zc2.iter().map(|zi| zi.matmul(&v).scale(2.0 * s2)).collect();
    Ok(RepresentationGrad { loss, d_z, d_z2 })
}

/// Gradients of the stochastic EY loss with respect to every network
/// parameter, for two independent batches. Tied models get the sum over
/// views.
pub fn backward_ey(model: &DeepModel, batch: &MultiviewBatch, batch2: &MultiviewBatch) -> Result<(f64, Vec<MlpGrad>)> {
    let c1 = model.forward_all(batch)?;
    let c2 = model.forward_all(batch2)?;
    let z: Vec<Matrix> = c1.iter().map(|c| c.output.clone()).collect();
    let z2: Vec<Matrix> = c2.iter().map(|c| c.output.clone()).collect();
    let rg = ey_representation_grad(&z, &z2)?;
    let mut grads: Vec<MlpGrad> = model.nets.iter().map(MlpGrad::zeros_like).collect();
    for i in 0..batch.n_views() {
        let net = model.net_for_view(i);
        let slot = if model.tied { 0 } else { i };
        grads[slot].add(&net.backward(&c1[i], &rg.d_z[i])?);
        grads[slot].add(&net.backward(&c2[i], &rg.d_z2[i])?);
    }
    Ok((rg.loss, grads))
}

#[derive(Debug, Clone)]
pub struct DeepConfig {
    /// Hidden widths; empty for a purely linear model.
    pub hidden: Vec<usize>,
    pub k: usize,
    pub tied: bool,
    pub optimizer: OptimizerConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepRecord {
    pub step: usize,
    pub loss: f64,
}

/// Fresh model for the given views.
pub fn init_model(rng: &mut Rng, dims: &[usize], config: &DeepConfig) -> Result<DeepModel> {
    let widths = |d: usize| {
        let mut w = vec![d];
        w.extend(&config.hidden);
        w.push(config.k);
        w
    };
    if config.tied {
        if dims.iter().any(|&d| d != dims[0]) {
            return Err(Error::ShapeMismatch("tied networks need equal view widths".into()));
        }
        Ok(DeepModel::tied(Mlp::random(rng, &widths(dims[0]))?))
    } else {
        DeepModel::untied(dims.iter().map(|&d| Mlp::random(rng, &widths(d))).collect::<Result<_>>()?)
    }
}

/// Mini-batch EY training of MLP encoders.
pub fn train_deep(batch: &MultiviewBatch, config: &DeepConfig) -> Result<(DeepModel, Vec<DeepRecord>)> {
    let mut rng = synth::rng(config.seed);
    let model = init_model(&mut rng, &batch.dims(), config)?;
    train_deep_from(batch, config, model, &mut rng)
}

pub fn train_deep_from(
    batch: &MultiviewBatch,
    config: &DeepConfig,
    mut model: DeepModel,
    rng: &mut Rng,
) -> Result<(DeepModel, Vec<DeepRecord>)> {
    let n = batch.n_samples();
    let m = config.batch_size;
    if m < 2 {
        return Err(Error::TooFewSamples(m));
    }
    if m > n {
        return Err(Error::InvalidParameter(format!("batch size {m} exceeds {n} samples")));
    }
    let nb = (n / m).max(1);
    let mut opt = Optimizer::new(config.optimizer)?;
    let mut params = model.to_flat();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let (i1, i2): (Vec<usize>, Vec<usize>) = match config.sampling {
            Sampling::Disjoint => {
                let t = step % nb;
                if t == 0 {
                    perm.shuffle(rng);
                }
                let t2 = (t + 1) % nb;
                (perm[t * m..(t + 1) * m].to_vec(), perm[t2 * m..(t2 + 1) * m].to_vec())
            }
            Sampling::Iid => {
                use rand::Rng as _;
                let a = (0..m).map(|_| rng.random_range(0..n)).collect();
                let b = (0..m).map(|_| rng.random_range(0..n)).collect();
                (a, b)
            }
        };
        let (loss, grads) = backward_ey(&model, &batch.select(&i1)?, &batch.select(&i2)?)?;
        trace.push(DeepRecord { step, loss });
        let flat: Vec<f64> = grads.iter().flat_map(MlpGrad::to_flat).collect();
        opt.step(&mut params, &flat)?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        model.set_flat(&params)?;
    }
    Ok((model, trace))
}

/// Full-batch EY loss of a model and `‖MCCA_K(Ẑ)‖²`; at a model whose final
/// linear layer is optimal the first is minus the second.
pub fn recovery_gap(model: &DeepModel, batch: &MultiviewBatch) -> Result<(f64, f64)> {
    let z = model.represent(batch)?;
    let k = z[0].cols();
    let loss = ey_representation_grad(&z, &z)?.loss;
    let reps = MultiviewBatch::new(z)?;
    let identity = WeightSet::new(vec![Matrix::identity(k); reps.n_views()])?;
    let spec = projected_spectrum(&reps, &identity, &vec![0.0; reps.n_views()])?.truncate(k);
    Ok((loss, spec.sum_squares()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_passes_input() {
        let x = Matrix::from_rows(&[&[1.0, -2.0], &[3.0, 0.5]]);
        assert_eq!(Mlp::linear(Matrix::identity(2)).predict(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let l = Layer {
            weight: Matrix::zeros(2, 3),
            bias: vec![0.1, 0.2, 0.3],
            activation: Activation::Identity,
        };
        let out = Mlp::new(vec![l]).unwrap().predict(&Matrix::identity(2)).unwrap();
        assert_eq!(out.row(1), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn final_layer_must_be_linear() {
        let l = Layer {
            weight: Matrix::zeros(2, 2),
            bias: vec![0.0; 2],
            activation: Activation::Relu,
        };
        assert!(Mlp::new(vec![l]).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let mut r = synth::rng(1);
        let mut net = Mlp::random(&mut r, &[3, 4, 2]).unwrap();
        let flat = net.to_flat();
        let before = net.clone();
        net.set_flat(&flat).unwrap();
        assert_eq!(net, before);
        assert_eq!(flat.len(), 3 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn zero_steps_returns_initial_model() {
        let mut r = synth::rng(2);
        let batch = MultiviewBatch::new(vec![synth::gaussian_matrix(&mut r, 20, 3), synth::gaussian_matrix(&mut r, 20, 3)]).unwrap();
        let cfg = DeepConfig {
            hidden: vec![4],
            k: 2,
            tied: false,
            optimizer: OptimizerConfig::sgd(0.1),
            steps: 0,
            batch_size: 10,
            sampling: Sampling::Disjoint,
            seed: 3,
        };
        let (m, trace) = train_deep(&batch, &cfg).unwrap();
        let init = init_model(&mut synth::rng(3), &[3, 3], &cfg).unwrap();
        assert_eq!(m, init);
        assert!(trace.is_empty());
    }
}
