use serde::{Deserialize, Serialize};

use super::activation::{softmax_into, ActivationKind};
use crate::error::{shape_err, Error, Result};
use crate::matrix::DenseMatrix;

/// Smallest probability admitted into a logarithm.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: ActivationKind,
}

impl LayerSpec {
    pub fn new(fan_in: usize, fan_out: usize, activation: ActivationKind) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer dimensions must be positive, got {fan_in}x{fan_out}"
            )));
        }
        Ok(Self {
            fan_in,
            fan_out,
            activation,
        })
    }
}

/// One fully connected layer. Column `n` of `weights` is the weight
/// vector of neuron `n`, i.e. one outcome of the layer's sample space.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
    pub activation: ActivationKind,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            fan_in: self.fan_in(),
            fan_out: self.fan_out(),
            activation: self.activation,
        }
    }
}

/// Fully connected network with a softmax head.
///
/// Hidden layers apply their elementwise activation; the last layer is
/// affine and its outputs are normalized with a softmax, so its stored
/// activation is always [`ActivationKind::Linear`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer pre-activations `g_i` and activations `f_i` for a batch.
/// The last entry of `activations` holds the softmax outputs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: DenseMatrix,
    pub pre_activations: Vec<DenseMatrix>,
    pub activations: Vec<DenseMatrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DenseMatrix {
        self.activations.last().expect("network has at least one layer")
    }

    /// Index of the first layer holding a non-finite value.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        (0..self.activations.len())
            .find(|&i| !self.pre_activations[i].is_finite() || !self.activations[i].is_finite())
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.output().row_iter().map(argmax).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
}

pub type Gradients = Vec<LayerGrad>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    /// Mean loss over the batch, in nats.
    pub nats: f64,
    /// Rows whose true-class probability fell below [`PROB_FLOOR`].
    pub clamped: usize,
}

impl Mlp {
    /// Builds a zero-initialized network. The final spec is the output
    /// layer; its activation must be `Linear` because the softmax head
    /// replaces it.
    pub fn new(specs: &[LayerSpec]) -> Result<Self> {
        let Some(last) = specs.last() else {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        };
        if last.activation != ActivationKind::Linear {
            return Err(Error::InvalidArgument(format!(
                "output layer feeds the softmax head and must be linear, got {}",
                last.activation
            )));
        }
        for (i, pair) in specs.windows(2).enumerate() {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(shape_err(
                    "Mlp::new",
                    format!("layer {} fan_in = {}", i + 1, pair[0].fan_out),
                    pair[1].fan_in,
                ));
            }
        }
        let layers = specs
            .iter()
            .map(|s| {
                if s.fan_in == 0 || s.fan_out == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "layer dimensions must be positive, got {}x{}",
                        s.fan_in, s.fan_out
                    )));
                }
                Ok(Layer {
                    weights: DenseMatrix::zeros(s.fan_in, s.fan_out),
                    biases: vec![0.0; s.fan_out],
                    activation: s.activation,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    /// `input → hidden[0] → … → classes` with one activation for every
    /// hidden layer.
    pub fn with_widths(input: usize, hidden: &[usize], classes: usize, activation: ActivationKind) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let specs = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == dims.len() {
                    ActivationKind::Linear
                } else {
                    activation
                };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&specs)
    }

    pub(crate) fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(Layer::spec).collect();
        let mut mlp = Self::new(&specs)?;
        for (dst, src) in mlp.layers.iter_mut().zip(layers) {
            if src.biases.len() != src.weights.cols() {
                return Err(shape_err("Mlp::from_layers", src.weights.cols(), src.biases.len()));
            }
            *dst = src;
        }
        Ok(mlp)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.fan_in() * l.fan_out() + l.fan_out()).sum()
    }

    /// Forward pass: `g_i = f_{i-1}·W_i + b_i`, `f_i = σ_i(g_i)`, softmax on
    /// the last layer.
    pub fn forward(&self, inputs: &DenseMatrix) -> Result<ForwardTrace> {
        if inputs.cols() != self.input_dim() {
            return Err(shape_err(
                "forward",
                format!("{} input columns", self.input_dim()),
                format!("{}x{} input", inputs.rows(), inputs.cols()),
            ));
        }
        let depth = self.layers.len();
        let mut pre = Vec::with_capacity(depth);
        let mut post: Vec<DenseMatrix> = Vec::with_capacity(depth);
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = if i == 0 { inputs } else { &post[i - 1] };
            let mut g = prev.matmul(&layer.weights)?;
            g.add_row_vector(&layer.biases);
            let f = if i + 1 == depth {
                let mut out = DenseMatrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    softmax_into(g.row(r), out.row_mut(r));
                }
                out
            } else {
                let act = layer.activation;
                g.map(|v| act.apply(v))
            };
            pre.push(g);
            post.push(f);
        }
        Ok(ForwardTrace {
            input: inputs.clone(),
            pre_activations: pre,
            activations: post,
        })
    }

    /// Closed-form gradients of the mean cross-entropy, averaged over the
    /// batch. The output error term is `f_Y − onehot(label)`.
    pub fn backward(&self, trace: &ForwardTrace, labels: &[usize]) -> Result<Gradients> {
        let depth = self.layers.len();
        if trace.activations.len() != depth || trace.pre_activations.len() != depth {
            return Err(shape_err("backward", format!("{depth} traced layers"), trace.activations.len()));
        }
        let out = trace.output();
        let batch = out.rows();
        if labels.len() != batch {
            return Err(shape_err("backward", format!("{batch} labels"), labels.len()));
        }
        let classes = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {classes})")));
        }
        let scale = 1.0 / batch.max(1) as f64;
        let mut delta = out.clone();
        for (r, &label) in labels.iter().enumerate() {
            let row = delta.row_mut(r);
            row[label] -= 1.0;
            row.iter_mut().for_each(|v| *v *= scale);
        }
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(depth);
        for i in (0..depth).rev() {
            let prev = if i == 0 { &trace.input } else { &trace.activations[i - 1] };
            let weights = prev.t_matmul(&delta)?;
            let biases = delta.column_sums();
            if i > 0 {
                let mut back = delta.matmul_t(&self.layers[i].weights)?;
                let act = self.layers[i - 1].activation;
                let g = &trace.pre_activations[i - 1];
                let f = &trace.activations[i - 1];
                for ((d, &gv), &fv) in back.as_mut_slice().iter_mut().zip(g.as_slice()).zip(f.as_slice()) {
                    *d *= act.derivative(gv, fv);
                }
                delta = back;
            }
            grads.push(LayerGrad { weights, biases });
        }
        grads.reverse();
        Ok(grads)
    }

    /// Mean cross-entropy (nats) and classification error for a batch.
    pub fn evaluate(&self, inputs: &DenseMatrix, labels: &[usize]) -> Result<(CrossEntropy, f64)> {
        let trace = self.forward(inputs)?;
        let loss = cross_entropy(trace.output(), labels)?;
        Ok((loss, error_rate(&trace.predictions(), labels)))
    }
}

/// Mean of `−ln f_{y,label}` over the batch, in nats.
pub fn cross_entropy(outputs: &DenseMatrix, labels: &[usize]) -> Result<CrossEntropy> {
    if outputs.rows() != labels.len() {
        return Err(shape_err("cross_entropy", format!("{} labels", outputs.rows()), labels.len()));
    }
    if outputs.rows() == 0 {
        return Err(Error::InvalidArgument("cross_entropy of an empty batch".into()));
    }
    let mut total = 0.0;
    let mut clamped = 0;
    for (row, &label) in outputs.row_iter().zip(labels) {
        let Some(&p) = row.get(label) else {
            return Err(Error::InvalidArgument(format!(
                "label {label} outside [0, {})",
                outputs.cols()
            )));
        };
        let p = if p < PROB_FLOOR {
            clamped += 1;
            PROB_FLOOR
        } else {
            p
        };
        total -= p.ln();
    }
    Ok(CrossEntropy {
        nats: total / labels.len() as f64,
        clamped,
    })
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn error_rate(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let wrong = predictions.iter().zip(labels).filter(|(p, l)| p != l).count();
    wrong as f64 / labels.len() as f64
}
