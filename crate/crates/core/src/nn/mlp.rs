use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kfac::LayerGradient;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, s: f64) -> f64 {
        match self {
            Self::Relu => s.max(0.0),
            Self::Tanh => s.tanh(),
            Self::Identity => s,
        }
    }

    /// Derivative at pre-activation `s`, given `a = apply(s)`.
    fn derivative(self, s: f64, a: f64) -> f64 {
        match self {
            Self::Relu => {
                if s > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - a * a,
            Self::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    SoftmaxCrossEntropy,
    /// `1/2 |s - y|^2` per sample.
    MeanSquaredError,
}

/// Training targets: class indices (one-hot under squared error) or dense
/// regression targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Targets(DenseMatrix),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Self::Classes(c) => c.len(),
            Self::Targets(t) => t.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, logits: &DenseMatrix) -> Result<()> {
        let (b, c) = logits.shape();
        match self {
            Self::Classes(l) if l.len() != b => Err(Error::invalid(format!(
                "{} labels for a batch of {b}",
                l.len()
            ))),
            Self::Classes(l) => match l.iter().find(|&&k| k >= c) {
                Some(k) => Err(Error::invalid(format!(
                    "label {k} out of range for {c} outputs"
                ))),
                None => Ok(()),
            },
            Self::Targets(t) if t.shape() != (b, c) => Err(Error::invalid(format!(
                "targets {:?} do not match outputs {:?}",
                t.shape(),
                (b, c)
            ))),
            Self::Targets(_) => Ok(()),
        }
    }

    fn target(&self, k: usize, j: usize) -> f64 {
        match self {
            Self::Classes(l) => f64::from(u8::from(l[k] == j)),
            Self::Targets(t) => t[(k, j)],
        }
    }
}

/// One fully connected layer `a = phi(W_bar [a_prev; 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `n_out x (n_in + 1)`, bias in the last column.
    pub weights: DenseMatrix,
    pub activation: Activation,
}

impl Layer {
    pub fn n_in(&self) -> usize {
        self.weights.cols() - 1
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("a network needs at least one layer"));
        };
        if last.activation != Activation::Identity {
            return Err(Error::invalid(
                "the output layer must use the identity activation",
            ));
        }
        for l in &layers {
            if l.weights.cols() < 2 || l.weights.rows() < 1 {
                return Err(Error::invalid(format!(
                    "layer weights {:?} are too small",
                    l.weights.shape()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::invalid(format!(
                    "layer {i} has {} outputs but layer {} expects {} inputs",
                    pair[0].n_out(),
                    i + 1,
                    pair[1].n_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Layer widths `sizes[0] -> ... -> sizes[last]` with `hidden` between
    /// layers, weights uniform in `+-1/sqrt(n_in)`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weights =
                    DenseMatrix::from_fn(w[1], w[0] + 1, |_, _| rng.random_range(-bound..bound));
                let activation = if i + 1 == n_layers {
                    Activation::Identity
                } else {
                    hidden
                };
                Layer {
                    weights,
                    activation,
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_weights(&self, i: usize) -> &DenseMatrix {
        &self.layers[i].weights
    }

    pub fn set_layer_weights(&mut self, i: usize, w: DenseMatrix) -> Result<()> {
        if w.shape() != self.layers[i].weights.shape() {
            return Err(Error::invalid(format!(
                "weights {:?} do not fit layer {i}",
                w.shape()
            )));
        }
        self.layers[i].weights = w;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols())
            .sum()
    }
}

/// Quantities saved by the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Layer inputs with the constant 1 appended, `b x (n_in + 1)` each.
    pub inputs: Vec<DenseMatrix>,
    /// Pre-activations `s`, `b x n_out` each.
    pub preactivations: Vec<DenseMatrix>,
    /// Post-activations, `b x n_out` each.
    pub outputs: Vec<DenseMatrix>,
}

fn append_ones(x: &DenseMatrix) -> DenseMatrix {
    let c = x.cols();
    DenseMatrix::from_fn(x.rows(), c + 1, |i, j| if j == c { 1.0 } else { x[(i, j)] })
}

/// Returns the logits (`b x n_out` of the last layer) and the cache.
pub fn mlp_forward(model: &MlpModel, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
    if x.cols() != model.input_dim() {
        return Err(Error::invalid(format!(
            "input width {} does not match the network's {}",
            x.cols(),
            model.input_dim()
        )));
    }
    let mut cache = ForwardCache {
        inputs: vec![],
        preactivations: vec![],
        outputs: vec![],
    };
    let mut current = x.clone();
    for layer in &model.layers {
        let input = append_ones(&current);
        let s = input.matmul_transposed(&layer.weights)?;
        let act = layer.activation;
        let a = DenseMatrix::from_fn(s.rows(), s.cols(), |i, j| act.apply(s[(i, j)]));
        cache.inputs.push(input);
        cache.preactivations.push(s);
        cache.outputs.push(a.clone());
        current = a;
    }
    Ok((current, cache))
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Mean loss over the batch.
pub fn loss_value(logits: &DenseMatrix, labels: &Labels, loss: Loss) -> Result<f64> {
    labels.check(logits)?;
    let (b, c) = logits.shape();
    let mut total = 0.0;
    for k in 0..b {
        let row = logits.row(k);
        total += match loss {
            Loss::SoftmaxCrossEntropy => {
                let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                (0..c)
                    .map(|j| labels.target(k, j) * (lse - row[j]))
                    .sum::<f64>()
            }
            Loss::MeanSquaredError => {
                0.5 * (0..c)
                    .map(|j| (row[j] - labels.target(k, j)).powi(2))
                    .sum::<f64>()
            }
        };
    }
    Ok(total / b as f64)
}

/// Per-sample derivative of the loss with respect to the logits.
fn output_gradient(logits: &DenseMatrix, labels: &Labels, loss: Loss) -> DenseMatrix {
    let (b, c) = logits.shape();
    let mut g = DenseMatrix::zeros(b, c);
    for k in 0..b {
        let p = match loss {
            Loss::SoftmaxCrossEntropy => softmax_row(logits.row(k)),
            Loss::MeanSquaredError => logits.row(k).to_vec(),
        };
        for j in 0..c {
            g[(k, j)] = p[j] - labels.target(k, j);
        }
    }
    g
}

/// Everything K-FAC reads from one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    /// `a_bar` of each layer's input, `b x (n_in + 1)`.
    pub activations: Vec<DenseMatrix>,
    /// Per-sample `g = dL_k/ds`, `b x n_out`.
    pub preact_grads: Vec<DenseMatrix>,
    /// Gradient of the mean loss with respect to each `W_bar`.
    pub grads: Vec<LayerGradient>,
    pub loss: f64,
}

impl BatchTrace {
    /// Largest deviation of `D Theta` from `(1/b) sum_k g_k a_k^T`, relative
    /// to the largest entry of each layer's `D Theta`.
    pub fn outer_product_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for ((a, g), d) in self
            .activations
            .iter()
            .zip(&self.preact_grads)
            .zip(&self.grads)
        {
            let b = a.rows();
            let mut sum = DenseMatrix::zeros(g.cols(), a.cols());
            for k in 0..b {
                for i in 0..g.cols() {
                    for j in 0..a.cols() {
                        sum[(i, j)] += g[(k, i)] * a[(k, j)];
                    }
                }
            }
            let scale = d.d_theta.max_abs().max(f64::MIN_POSITIVE);
            for (x, y) in sum.data().iter().zip(d.d_theta.data()) {
                worst = worst.max((x / b as f64 - y).abs() / scale);
            }
        }
        worst
    }
}

/// Backpropagates `loss` through the cached forward pass.
pub fn mlp_backward(
    model: &MlpModel,
    cache: &ForwardCache,
    logits: &DenseMatrix,
    labels: &Labels,
    loss: Loss,
) -> Result<BatchTrace> {
    labels.check(logits)?;
    if cache.inputs.len() != model.layers.len() {
        return Err(Error::invalid("forward cache does not match the network"));
    }
    let loss_val = loss_value(logits, labels, loss)?;
    let n = model.layers.len();
    let b = logits.rows();
    let inv_b = 1.0 / b as f64;
    let mut preact_grads = vec![DenseMatrix::zeros(0, 0); n];
    let mut grads = vec![LayerGradient::new(DenseMatrix::zeros(0, 0)); n];
    let mut g = output_gradient(logits, labels, loss);
    for l in (0..n).rev() {
        let input = &cache.inputs[l];
        grads[l] = LayerGradient::new(g.transpose().matmul(input)?.scale(inv_b));
        if l > 0 {
            // Drop the bias column, then multiply by phi'(s) of the layer below.
            let w = &model.layers[l].weights;
            let n_in = w.cols() - 1;
            let w_no_bias = DenseMatrix::from_fn(w.rows(), n_in, |i, j| w[(i, j)]);
            let upstream = g.matmul(&w_no_bias)?;
            let below = &model.layers[l - 1];
            let s = &cache.preactivations[l - 1];
            let a = &cache.outputs[l - 1];
            let next = DenseMatrix::from_fn(b, n_in, |k, j| {
                upstream[(k, j)] * below.activation.derivative(s[(k, j)], a[(k, j)])
            });
            preact_grads[l] = std::mem::replace(&mut g, next);
        } else {
            preact_grads[l] = std::mem::replace(&mut g, DenseMatrix::zeros(0, 0));
        }
    }
    Ok(BatchTrace {
        activations: cache.inputs.clone(),
        preact_grads,
        grads,
        loss: loss_val,
    })
}

/// Predicted class per row.
pub fn argmax_rows(logits: &DenseMatrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|k| {
            let row = logits.row(k);
            (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
        })
        .collect()
}
