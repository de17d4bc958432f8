//! Dense feed-forward classifier with tape-based reverse-mode gradients.
//!
//! The layer set is intentionally small: `Dense`, `Relu`, `Dropout`,
//! `BatchNorm`, and a single final `Softmax`. A training forward pass records
//! everything the backward pass needs into a [`Tape`]; calling
//! [`DenseNet::backward`] with the gradient of a scalar loss with respect to
//! the output probabilities yields gradients for every trainable parameter
//! plus the gradient with respect to the input batch.
//!
//! Conventions baked in here and relied on by the tests:
//! - ReLU uses subgradient 0 at exactly 0.
//! - Dropout is "inverted": kept activations are scaled by `1/(1-rate)` at
//!   train time, eval is the identity.
//! - BatchNorm normalizes with biased batch variance at train time and keeps
//!   running statistics (`r <- momentum*r + (1-momentum)*batch`) for eval.
//! - Softmax subtracts the row max before exponentiating, so logits at
//!   magnitude 1e4 stay finite.

mod checkpoint;
mod sgd;

pub use checkpoint::{load_params, read_params, save_params, write_params};
pub use sgd::SgdMomentum;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use rand::Rng as _;

/// Architecture description for one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// Fully connected `inputs -> outputs` with per-layer weight decay.
    Dense { inputs: usize, outputs: usize, l2: f64 },
    Relu,
    /// Inverted dropout; `rate` is the probability of zeroing an activation.
    Dropout { rate: f64 },
    /// Per-feature normalization over the batch dimension.
    BatchNorm { momentum: f64, epsilon: f64 },
    /// Row-wise softmax. Must appear exactly once, as the final layer.
    Softmax,
}

/// A layer with its state. Obtainable read-only via [`DenseNet::layers`].
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        /// `inputs x outputs`.
        weight: Matrix,
        bias: Vec<f64>,
        l2: f64,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    BatchNorm {
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        momentum: f64,
        epsilon: f64,
    },
    Softmax,
}

/// Per-layer values saved by a training forward pass.
#[derive(Debug, Clone)]
enum Record {
    Dense { input: Matrix },
    Relu { mask: Matrix },
    Dropout { scale: Matrix },
    BatchNorm { x_hat: Matrix, inv_std: Vec<f64> },
    Softmax { output: Matrix },
}

/// Saved activations from one training forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    records: Vec<Record>,
    input: Matrix,
    output_shape: (usize, usize),
}

/// Gradient of a scalar loss with respect to one layer's parameters.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Dense { weight: Matrix, bias: Vec<f64> },
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
    /// The layer has no trainable parameters.
    None,
}

/// Parameter gradients, one entry per layer in network order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    /// Flatten in the same order as [`DenseNet::params_vec`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerGrads::Dense { weight, bias } => {
                    out.extend_from_slice(weight.as_slice());
                    out.extend_from_slice(bias);
                }
                LayerGrads::BatchNorm { gamma, beta } => {
                    out.extend_from_slice(gamma);
                    out.extend_from_slice(beta);
                }
                LayerGrads::None => {}
            }
        }
        out
    }
}

/// Feed-forward network. See the module docs for layer semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
    has_dropout: bool,
}

impl DenseNet {
    /// Build and initialize a network.
    ///
    /// Dense weights are Glorot-uniform (`+-sqrt(6/(fan_in+fan_out))`) drawn
    /// from `rng`, biases zero; BatchNorm starts at `gamma=1, beta=0` with
    /// running statistics `(0, 1)`.
    ///
    /// Returns a contract error unless the spec starts with a `Dense` layer,
    /// chains dimensions consistently, and ends with the only `Softmax`.
    pub fn new(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        let input_dim = match specs[0] {
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => return Err(Error::Contract("first layer must be Dense".into())),
        };
        match specs.last() {
            Some(LayerSpec::Softmax) => {}
            _ => return Err(Error::Contract("last layer must be Softmax".into())),
        }

        let mut layers = Vec::with_capacity(specs.len());
        let mut width = input_dim;
        let mut has_dropout = false;
        for (idx, spec) in specs.iter().enumerate() {
            let is_last = idx == specs.len() - 1;
            match *spec {
                LayerSpec::Dense { inputs, outputs, l2 } => {
                    if inputs == 0 || outputs == 0 {
                        return Err(Error::Contract(format!("layer {idx}: zero-width Dense")));
                    }
                    if inputs != width {
                        return Err(Error::Shape(format!(
                            "layer {idx}: Dense expects {inputs} inputs but receives {width}"
                        )));
                    }
                    if !(l2 >= 0.0) {
                        return Err(Error::Contract(format!("layer {idx}: negative l2")));
                    }
                    let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                    let mut weight = Matrix::zeros(inputs, outputs);
                    for w in weight.as_mut_slice() {
                        *w = rng.random_range(-limit..limit);
                    }
                    layers.push(Layer::Dense { weight, bias: vec![0.0; outputs], l2 });
                    width = outputs;
                }
                LayerSpec::Relu => layers.push(Layer::Relu),
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::Contract(format!(
                            "layer {idx}: dropout rate {rate} outside [0, 1)"
                        )));
                    }
                    has_dropout = true;
                    layers.push(Layer::Dropout { rate });
                }
                LayerSpec::BatchNorm { momentum, epsilon } => {
                    if !(0.0..=1.0).contains(&momentum) {
                        return Err(Error::Contract(format!(
                            "layer {idx}: batchnorm momentum {momentum} outside [0, 1]"
                        )));
                    }
                    if !(epsilon > 0.0) {
                        return Err(Error::Contract(format!(
                            "layer {idx}: batchnorm epsilon must be positive"
                        )));
                    }
                    layers.push(Layer::BatchNorm {
                        gamma: vec![1.0; width],
                        beta: vec![0.0; width],
                        running_mean: vec![0.0; width],
                        running_var: vec![1.0; width],
                        momentum,
                        epsilon,
                    });
                }
                LayerSpec::Softmax => {
                    if !is_last {
                        return Err(Error::Contract(format!(
                            "layer {idx}: Softmax must be the final layer"
                        )));
                    }
                    layers.push(Layer::Softmax);
                }
            }
        }

        Ok(DenseNet { layers, input_dim, output_dim: width, has_dropout })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Training forward pass. Returns the output probabilities and the tape
    /// for [`backward`](Self::backward). Updates BatchNorm running statistics.
    ///
    /// `rng` may be `None` only if the network has no dropout layer.
    pub fn forward_train(&mut self, x: &Matrix, rng: Option<&mut Rng>) -> Result<(Matrix, Tape)> {
        self.check_input(x)?;
        if self.has_dropout && rng.is_none() {
            return Err(Error::Contract(
                "training forward needs an rng because the network has dropout".into(),
            ));
        }
        let mut rng = rng;
        let mut records = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        let batch = x.rows() as f64;

        for (idx, layer) in self.layers.iter_mut().enumerate() {
            act = match layer {
                Layer::Dense { weight, bias, .. } => {
                    records.push(Record::Dense { input: act.clone() });
                    dense_forward(&act, weight, bias)
                }
                Layer::Relu => {
                    let mask = act.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    let out = act.zip_map(&mask, |v, m| v * m);
                    records.push(Record::Relu { mask });
                    out
                }
                Layer::Dropout { rate } => {
                    let rate = *rate;
                    let keep_scale = 1.0 / (1.0 - rate);
                    let r = rng.as_deref_mut().expect("checked above");
                    let scale = act.map(|_| if r.random::<f64>() < rate { 0.0 } else { keep_scale });
                    let out = act.zip_map(&scale, |v, s| v * s);
                    records.push(Record::Dropout { scale });
                    out
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    momentum,
                    epsilon,
                } => {
                    let n = gamma.len();
                    let mut mean = vec![0.0; n];
                    let mut var = vec![0.0; n];
                    for b in 0..act.rows() {
                        for (m, &v) in mean.iter_mut().zip(act.row(b)) {
                            *m += v;
                        }
                    }
                    for m in &mut mean {
                        *m /= batch;
                    }
                    for b in 0..act.rows() {
                        for ((s, &v), &m) in var.iter_mut().zip(act.row(b)).zip(&mean) {
                            let d = v - m;
                            *s += d * d;
                        }
                    }
                    for s in &mut var {
                        *s /= batch;
                    }
                    let inv_std: Vec<f64> =
                        var.iter().map(|&v| 1.0 / (v + *epsilon).sqrt()).collect();
                    let mut x_hat = act.clone();
                    for b in 0..x_hat.rows() {
                        for ((v, &m), &s) in x_hat.row_mut(b).iter_mut().zip(&mean).zip(&inv_std) {
                            *v = (*v - m) * s;
                        }
                    }
                    let mut out = x_hat.clone();
                    for b in 0..out.rows() {
                        for ((v, &g), &be) in out.row_mut(b).iter_mut().zip(&*gamma).zip(&*beta) {
                            *v = *v * g + be;
                        }
                    }
                    for (r, &m) in running_mean.iter_mut().zip(&mean) {
                        *r = *momentum * *r + (1.0 - *momentum) * m;
                    }
                    for (r, &v) in running_var.iter_mut().zip(&var) {
                        *r = *momentum * *r + (1.0 - *momentum) * v;
                    }
                    records.push(Record::BatchNorm { x_hat, inv_std });
                    out
                }
                Layer::Softmax => {
                    let out = softmax(&act);
                    records.push(Record::Softmax { output: out.clone() });
                    out
                }
            };
            if !act.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite activations after layer {idx} ({})",
                    layer_name(&self.layers[idx])
                )));
            }
        }

        let tape = Tape { records, input: x.clone(), output_shape: act.shape() };
        Ok((act, tape))
    }

    /// Inference forward pass: dropout is the identity, BatchNorm uses its
    /// running statistics, and nothing is mutated or recorded.
    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            act = match layer {
                Layer::Dense { weight, bias, .. } => dense_forward(&act, weight, bias),
                Layer::Relu => act.map(|v| if v > 0.0 { v } else { 0.0 }),
                Layer::Dropout { .. } => act,
                Layer::BatchNorm { gamma, beta, running_mean, running_var, epsilon, .. } => {
                    let mut out = act;
                    for b in 0..out.rows() {
                        let row = out.row_mut(b);
                        for (k, v) in row.iter_mut().enumerate() {
                            let inv = 1.0 / (running_var[k] + *epsilon).sqrt();
                            *v = (*v - running_mean[k]) * inv * gamma[k] + beta[k];
                        }
                    }
                    out
                }
                Layer::Softmax => softmax(&act),
            };
            if !act.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite activations after layer {idx} ({})",
                    layer_name(layer)
                )));
            }
        }
        Ok(act)
    }

    /// Reverse-mode pass. `output_grad` is the gradient of a scalar loss with
    /// respect to the probabilities returned by the forward pass that
    /// produced `tape`. Returns parameter gradients (including each Dense
    /// layer's `l2 * W` decay term) and the gradient with respect to the
    /// input batch.
    pub fn backward(&self, tape: &Tape, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        if tape.records.len() != self.layers.len() {
            return Err(Error::State(
                "tape does not match this network (layer count differs)".into(),
            ));
        }
        if output_grad.shape() != tape.output_shape {
            return Err(Error::Shape(format!(
                "output gradient is {:?} but the forward output was {:?}",
                output_grad.shape(),
                tape.output_shape
            )));
        }

        let mut grad = output_grad.clone();
        let mut layer_grads = vec![LayerGrads::None; self.layers.len()];

        for idx in (0..self.layers.len()).rev() {
            match (&self.layers[idx], &tape.records[idx]) {
                (Layer::Dense { weight, l2, .. }, Record::Dense { input }) => {
                    if input.cols() != weight.rows() || grad.cols() != weight.cols() {
                        return Err(Error::State("tape does not match this network".into()));
                    }
                    let mut dw = input.transpose_matmul(&grad);
                    if *l2 > 0.0 {
                        dw.add_scaled(weight, *l2);
                    }
                    let db = grad.col_sums();
                    let dx = grad.matmul_transpose(weight);
                    layer_grads[idx] = LayerGrads::Dense { weight: dw, bias: db };
                    grad = dx;
                }
                (Layer::Relu, Record::Relu { mask }) => {
                    grad = grad.zip_map(mask, |g, m| g * m);
                }
                (Layer::Dropout { .. }, Record::Dropout { scale }) => {
                    grad = grad.zip_map(scale, |g, s| g * s);
                }
                (Layer::BatchNorm { gamma, .. }, Record::BatchNorm { x_hat, inv_std }) => {
                    let b = grad.rows() as f64;
                    let dbeta = grad.col_sums();
                    let dgamma: Vec<f64> = {
                        let prod = grad.zip_map(x_hat, |g, xh| g * xh);
                        prod.col_sums()
                    };
                    let mut dx = Matrix::zeros(grad.rows(), grad.cols());
                    for r in 0..grad.rows() {
                        for k in 0..grad.cols() {
                            let centered =
                                grad[(r, k)] - dbeta[k] / b - x_hat[(r, k)] * dgamma[k] / b;
                            dx[(r, k)] = gamma[k] * inv_std[k] * centered;
                        }
                    }
                    layer_grads[idx] = LayerGrads::BatchNorm { gamma: dgamma, beta: dbeta };
                    grad = dx;
                }
                (Layer::Softmax, Record::Softmax { output }) => {
                    let mut dz = Matrix::zeros(grad.rows(), grad.cols());
                    for r in 0..grad.rows() {
                        let g = grad.row(r);
                        let p = output.row(r);
                        let inner: f64 = g.iter().zip(p).map(|(&gi, &pi)| gi * pi).sum();
                        for (k, d) in dz.row_mut(r).iter_mut().enumerate() {
                            *d = p[k] * (g[k] - inner);
                        }
                    }
                    grad = dz;
                }
                _ => return Err(Error::State("tape does not match this network".into())),
            }
        }
        if grad.shape() != tape.input.shape() {
            return Err(Error::State("tape does not match this network".into()));
        }
        Ok((Gradients { layers: layer_grads }, grad))
    }

    /// Sum of `l2/2 * |W|^2` over Dense layers. The training loss functions
    /// report the data term only; add this when comparing against finite
    /// differences of a total objective.
    pub fn regularization_loss(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense { weight, l2, .. } => {
                    0.5 * l2 * weight.as_slice().iter().map(|w| w * w).sum::<f64>()
                }
                _ => 0.0,
            })
            .sum()
    }

    /// All trainable parameters flattened in layer order (Dense: weight
    /// row-major then bias; BatchNorm: gamma then beta). Running statistics
    /// are state, not parameters, and are excluded.
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense { weight, bias, .. } => {
                    out.extend_from_slice(weight.as_slice());
                    out.extend_from_slice(bias);
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.extend_from_slice(gamma);
                    out.extend_from_slice(beta);
                }
                _ => {}
            }
        }
        out
    }

    /// Overwrite all trainable parameters from a flat vector laid out as in
    /// [`params_vec`](Self::params_vec).
    pub fn set_params_vec(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.params_vec().len();
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        let mut it = params.iter();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { weight, bias, .. } => {
                    for w in weight.as_mut_slice() {
                        *w = *it.next().unwrap();
                    }
                    for b in bias {
                        *b = *it.next().unwrap();
                    }
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    for g in gamma {
                        *g = *it.next().unwrap();
                    }
                    for b in beta {
                        *b = *it.next().unwrap();
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features but the network expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        if !x.all_finite() {
            return Err(Error::Numeric("non-finite values in the input batch".into()));
        }
        Ok(())
    }
}

fn dense_forward(x: &Matrix, weight: &Matrix, bias: &[f64]) -> Matrix {
    let mut out = x.matmul(weight);
    for r in 0..out.rows() {
        for (v, &b) in out.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
    out
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn layer_name(layer: &Layer) -> &'static str {
    match layer {
        Layer::Dense { .. } => "Dense",
        Layer::Relu => "Relu",
        Layer::Dropout { .. } => "Dropout",
        Layer::BatchNorm { .. } => "BatchNorm",
        Layer::Softmax => "Softmax",
    }
}
