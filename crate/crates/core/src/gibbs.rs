//! Per-layer Gibbs probability space and the information quantities built
//! on it.
//!
//! For a layer with activations `f_i(x)`, the outcome space is the set of
//! the layer's neurons and
//!
//! ```text
//! P(F_i = n | X = x) = exp(f_in(x)) / Σ_n' exp(f_in'(x))
//! ```
//!
//! The marginal `P(F_i)` averages the conditionals over the supplied
//! dataset (each sample weighted `1/J`), and `P(F_i | Y = l)` averages over
//! the samples carrying label `l`. All entropies are in bits.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::nn::{softmax_into, ForwardTrace, Mlp, PROB_FLOOR};

/// Row-stochastic table `P(F_i = n | X = x^j)` for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGibbs {
    pub conditional: DenseMatrix,
    pub layer_index: usize,
}

impl LayerGibbs {
    /// Applies [`layer_conditional`] to every row of a `J × N` activation
    /// matrix.
    pub fn from_activations(activations: &DenseMatrix, layer_index: usize) -> Result<Self> {
        if activations.cols() == 0 {
            return Err(Error::InvalidArgument("layer has no neurons".into()));
        }
        if !activations.is_finite() {
            return Err(Error::NonFinite(format!("activations of layer {layer_index}")));
        }
        let mut conditional = DenseMatrix::zeros(activations.rows(), activations.cols());
        for r in 0..activations.rows() {
            softmax_into(activations.row(r), conditional.row_mut(r));
        }
        Ok(Self {
            conditional,
            layer_index,
        })
    }

    /// Wraps a table that is already row-stochastic (e.g. softmax outputs).
    pub fn from_probabilities(table: DenseMatrix, layer_index: usize) -> Result<Self> {
        if table.cols() == 0 {
            return Err(Error::InvalidArgument("layer has no neurons".into()));
        }
        for (j, row) in table.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "row {j} of layer {layer_index} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(Self {
            conditional: table,
            layer_index,
        })
    }

    pub fn samples(&self) -> usize {
        self.conditional.rows()
    }

    pub fn neuron_count(&self) -> usize {
        self.conditional.cols()
    }
}

/// Softmax of one activation vector, max-subtracted.
pub fn layer_conditional(activations: &[f64]) -> Result<Vec<f64>> {
    if activations.is_empty() {
        return Err(Error::InvalidArgument("layer_conditional of an empty layer".into()));
    }
    if let Some(v) = activations.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("activation {v}")));
    }
    let mut out = vec![0.0; activations.len()];
    softmax_into(activations, &mut out);
    Ok(out)
}

/// `P(F_i = n) = (1/J) Σ_j P(F_i = n | x^j)`
pub fn marginal(layer: &LayerGibbs) -> Vec<f64> {
    layer.conditional.column_means()
}

/// `P(F_i = n | Y = l)`: mean of the conditional rows whose label is `l`.
pub fn label_conditional(layer: &LayerGibbs, labels: &[usize], l: usize) -> Result<Vec<f64>> {
    check_labels(layer, labels)?;
    let mut acc = vec![0.0; layer.neuron_count()];
    let mut count = 0usize;
    for (row, _) in layer.conditional.row_iter().zip(labels).filter(|(_, &y)| y == l) {
        count += 1;
        for (a, p) in acc.iter_mut().zip(row) {
            *a += p;
        }
    }
    if count == 0 {
        return Err(Error::EmptyClass(l));
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(acc)
}

/// Shannon entropy in bits with `0·log 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if let Some(v) = p.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative or NaN probability {v}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .fold(0.0, |h, &v| h - v * v.max(PROB_FLOOR).log2())
}

/// `H(F_i | X)`: mean entropy of the conditional rows.
pub fn conditional_entropy_given_x(layer: &LayerGibbs) -> f64 {
    let j = layer.samples().max(1) as f64;
    layer.conditional.row_iter().map(entropy_unchecked).sum::<f64>() / j
}

/// `H(F_i | Y) = Σ_l (N(l)/J) · H(P(F_i | Y = l))` over the labels present.
pub fn conditional_entropy_given_y(layer: &LayerGibbs, labels: &[usize]) -> Result<f64> {
    check_labels(layer, labels)?;
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![vec![0.0; layer.neuron_count()]; classes];
    let mut counts = vec![0usize; classes];
    for (row, &y) in layer.conditional.row_iter().zip(labels) {
        counts[y] += 1;
        for (a, p) in sums[y].iter_mut().zip(row) {
            *a += p;
        }
    }
    let j = labels.len() as f64;
    Ok(sums
        .iter_mut()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| {
            s.iter_mut().for_each(|v| *v /= c as f64);
            (c as f64 / j) * entropy_unchecked(s)
        })
        .sum())
}

/// `I(X, F_i) = H(F_i) − H(F_i | X)`
pub fn mi_x(layer: &LayerGibbs) -> f64 {
    entropy_unchecked(&marginal(layer)) - conditional_entropy_given_x(layer)
}

/// `I(Y, F_i) = H(F_i) − H(F_i | Y)`
pub fn mi_y(layer: &LayerGibbs, labels: &[usize]) -> Result<f64> {
    Ok(entropy_unchecked(&marginal(layer)) - conditional_entropy_given_y(layer, labels)?)
}

/// `I(X̄, F_i) = I(X, F_i) − I(Y, F_i)`, unclamped.
pub fn mi_xbar(i_x: f64, i_y: f64) -> f64 {
    i_x - i_y
}

fn check_labels(layer: &LayerGibbs, labels: &[usize]) -> Result<()> {
    if labels.len() != layer.samples() {
        return Err(crate::error::shape_err(
            "label vector",
            format!("{} labels", layer.samples()),
            labels.len(),
        ));
    }
    Ok(())
}

/// Information quantities of one layer, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiSummary {
    pub layer: usize,
    pub h_f: f64,
    pub h_f_given_x: f64,
    pub h_f_given_y: f64,
    pub i_x: f64,
    pub i_y: f64,
    pub i_xbar: f64,
}

impl MiSummary {
    pub fn from_layer(layer: &LayerGibbs, labels: &[usize]) -> Result<Self> {
        let h_f = entropy_unchecked(&marginal(layer));
        let h_f_given_x = conditional_entropy_given_x(layer);
        let h_f_given_y = conditional_entropy_given_y(layer, labels)?;
        let i_x = h_f - h_f_given_x;
        let i_y = h_f - h_f_given_y;
        Ok(Self {
            layer: layer.layer_index,
            h_f,
            h_f_given_x,
            h_f_given_y,
            i_x,
            i_y,
            i_xbar: mi_xbar(i_x, i_y),
        })
    }
}

/// Gibbs tables for every layer of a traced forward pass. Hidden layers
/// use the softmax of their activations; the output layer uses the
/// network's own softmax output.
pub fn layer_tables(trace: &ForwardTrace) -> Result<Vec<LayerGibbs>> {
    let depth = trace.activations.len();
    trace
        .activations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if i + 1 == depth {
                LayerGibbs::from_probabilities(a.clone(), i)
            } else {
                LayerGibbs::from_activations(a, i)
            }
        })
        .collect()
}

pub fn summaries_from_trace(trace: &ForwardTrace, labels: &[usize]) -> Result<Vec<MiSummary>> {
    layer_tables(trace)?
        .iter()
        .map(|t| MiSummary::from_layer(t, labels))
        .collect()
}

/// One [`MiSummary`] per layer (output included), with `P(X)` uniform over
/// the supplied dataset.
pub fn flow_summary(mlp: &Mlp, data: &Dataset) -> Result<Vec<MiSummary>> {
    let trace = mlp.forward(&data.inputs)?;
    summaries_from_trace(&trace, &data.labels)
}

/// Recomputes the output distribution of a two-hidden-layer network by
/// explicitly summing the layer chain
/// `Σ_k Σ_t P(F_Y = l | F_2 = k) · P(F_2 = k | F_1 = t) · P(F_1 = t | x)`
/// and returns the largest deviation from the direct softmax output.
///
/// Each factor is the Gibbs measure of its layer evaluated on the
/// deterministic activations of the layer below, so it does not depend on
/// the summation index of that layer.
pub fn marginal_chain_check(mlp: &Mlp, x: &[f64]) -> Result<f64> {
    if mlp.depth() != 3 {
        return Err(Error::InvalidArgument(format!(
            "chain check needs two hidden layers and an output layer, got {} layers",
            mlp.depth()
        )));
    }
    let input = DenseMatrix::new(1, x.len(), x.to_vec())?;
    let trace = mlp.forward(&input)?;
    let p1 = layer_conditional(trace.activations[0].row(0))?;
    let p2 = layer_conditional(trace.activations[1].row(0))?;
    let direct = trace.output().row(0);
    let p_y_given_2 = |_k: usize| -> Result<Vec<f64>> { layer_conditional(trace.pre_activations[2].row(0)) };
    let p_2_given_1 = |k: usize, _t: usize| p2[k];

    let mut max_dev = 0.0f64;
    let py_rows: Vec<Vec<f64>> = (0..p2.len()).map(p_y_given_2).collect::<Result<_>>()?;
    for (l, &d) in direct.iter().enumerate() {
        let mut total = 0.0;
        for (k, py) in py_rows.iter().enumerate() {
            let mut inner = 0.0;
            for (t, &pt) in p1.iter().enumerate() {
                inner += p_2_given_1(k, t) * pt;
            }
            total += py[l] * inner;
        }
        max_dev = max_dev.max((total - d).abs());
    }
    Ok(max_dev)
}

/// `H(Y | X)` in bits, grouping bit-identical input rows.
pub fn label_determinism_check(data: &Dataset) -> f64 {
    let mut groups: BTreeMap<Vec<u64>, BTreeMap<usize, usize>> = BTreeMap::new();
    for (row, &y) in data.inputs.row_iter().zip(&data.labels) {
        let key = row.iter().map(|v| v.to_bits()).collect();
        *groups.entry(key).or_default().entry(y).or_default() += 1;
    }
    let j = data.len() as f64;
    groups
        .values()
        .map(|counts| {
            let n: usize = counts.values().sum();
            let p: Vec<f64> = counts.values().map(|&c| c as f64 / n as f64).collect();
            (n as f64 / j) * entropy_unchecked(&p)
        })
        .sum()
}

pub const SUMMARY_CSV_HEADER: [&str; 7] = ["layer", "H_F", "H_F_given_X", "H_F_given_Y", "I_X", "I_Y", "I_Xbar"];

pub fn write_summary_csv<W: Write>(summaries: &[MiSummary], w: W) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    csv.write_record(SUMMARY_CSV_HEADER)?;
    for s in summaries {
        csv.write_record([
            s.layer.to_string(),
            s.h_f.to_string(),
            s.h_f_given_x.to_string(),
            s.h_f_given_y.to_string(),
            s.i_x.to_string(),
            s.i_y.to_string(),
            s.i_xbar.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
