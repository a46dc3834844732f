//! Non-parametric estimators that treat a layer as a continuous random
//! vector: equal-width binning and a Gaussian kernel mixture.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::DenseMatrix;
use crate::nn::ActivationKind;
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RangeMode {
    PerLayerMinMax,
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub num_bins: usize,
    pub range_mode: RangeMode,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            num_bins: 30,
            range_mode: RangeMode::PerLayerMinMax,
        }
    }
}

impl BinningConfig {
    /// `[-1, 1]` for Tanh, `[0, max]` for ReLU, the layer's own range
    /// otherwise.
    pub fn for_activation(kind: ActivationKind, activations: &DenseMatrix, num_bins: usize) -> Self {
        let range_mode = match kind {
            ActivationKind::Tanh => RangeMode::Fixed { lo: -1.0, hi: 1.0 },
            ActivationKind::ReLU => RangeMode::Fixed {
                lo: 0.0,
                hi: activations.as_slice().iter().copied().fold(0.0, f64::max),
            },
            _ => RangeMode::PerLayerMinMax,
        };
        Self { num_bins, range_mode }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 2 {
            return Err(Error::InvalidArgument(format!("num_bins must be at least 2, got {}", self.num_bins)));
        }
        if let RangeMode::Fixed { lo, hi } = self.range_mode {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("bad binning range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub noise_variance: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self { noise_variance: 0.1 }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// Output of a baseline estimator, in bits. `h_t` is the estimator's own
/// entropy of the layer (discrete for binning, differential for KDE).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMi {
    pub h_t: f64,
    pub i_x: f64,
    pub i_y: f64,
}

fn check_inputs(activations: &DenseMatrix, labels: &[usize], min_rows: usize) -> Result<()> {
    if labels.len() != activations.rows() {
        return Err(shape_err("label vector", format!("{} labels", activations.rows()), labels.len()));
    }
    if activations.rows() < min_rows {
        return Err(Error::InvalidArgument(format!(
            "estimator needs at least {min_rows} samples, got {}",
            activations.rows()
        )));
    }
    if !activations.is_finite() {
        return Err(Error::NonFinite("baseline activations".into()));
    }
    Ok(())
}

fn entropy_of_counts<'a>(counts: impl Iterator<Item = &'a usize>, total: usize) -> f64 {
    let total = total as f64;
    counts.fold(0.0, |h, &c| {
        let p = c as f64 / total;
        h - p * p.log2()
    })
}

/// Bin index of every activation; a degenerate range maps to bin 0.
pub fn bin_indices(activations: &DenseMatrix, config: &BinningConfig) -> Result<Vec<Vec<u16>>> {
    config.validate()?;
    let (lo, hi) = match config.range_mode {
        RangeMode::Fixed { lo, hi } => (lo, hi),
        RangeMode::PerLayerMinMax => {
            let s = activations.as_slice();
            (
                s.iter().copied().fold(f64::INFINITY, f64::min),
                s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    let nb = config.num_bins;
    let width = (hi - lo) / nb as f64;
    Ok(activations
        .row_iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if !(width > 0.0) {
                        0
                    } else {
                        (((v - lo) / width).floor().max(0.0) as usize).min(nb - 1) as u16
                    }
                })
                .collect()
        })
        .collect())
}

/// Discretizes every neuron into equal-width bins and treats each sample's
/// bin vector as one state `T`. Inputs are assumed distinct, so
/// `I(X, T) = H(T)`.
pub fn binned_mi(activations: &DenseMatrix, labels: &[usize], config: &BinningConfig) -> Result<BaselineMi> {
    check_inputs(activations, labels, 1)?;
    let states = bin_indices(activations, config)?;
    let j = states.len();
    let mut all: BTreeMap<&[u16], usize> = BTreeMap::new();
    let mut per_label: BTreeMap<usize, BTreeMap<&[u16], usize>> = BTreeMap::new();
    for (s, &y) in states.iter().zip(labels) {
        *all.entry(s).or_default() += 1;
        *per_label.entry(y).or_default().entry(s).or_default() += 1;
    }
    let h_t = entropy_of_counts(all.values(), j);
    let h_t_given_y: f64 = per_label
        .values()
        .map(|counts| {
            let n: usize = counts.values().sum();
            (n as f64 / j as f64) * entropy_of_counts(counts.values(), n)
        })
        .sum();
    Ok(BaselineMi {
        h_t,
        i_x: h_t,
        i_y: h_t - h_t_given_y,
    })
}

pub fn kde_mi(activations: &DenseMatrix, labels: &[usize], config: &KdeConfig) -> Result<BaselineMi> {
    kde_mi_with(activations, labels, config, Exec::default())
}

const KDE_BLOCK: usize = 64;

/// Pairwise-distance Gaussian mixture bound. With `K_ij =
/// exp(-‖h_i − h_j‖² / 2σ²)`:
///
/// ```text
/// I(X, T) = −(1/J) Σ_i log2 (1/J) Σ_j K_ij
/// I(Y, T) = I(X, T) − Σ_l p_l · [−(1/J_l) Σ_{i∈l} log2 (1/J_l) Σ_{j∈l} K_ij]
/// ```
///
/// This is the pairwise-KL upper bound on the mixture entropy,
/// `H(T) ≤ H(T | X) − (1/J) Σ_i log2 (1/J) Σ_j exp(−KL_ij)`, where the KL
/// divergence between two components is `‖h_i − h_j‖² / 2σ²`, so the
/// `H(T | X) = (N/2)·log2(2πeσ²)` term cancels and identical rows give
/// exactly zero.
pub fn kde_mi_with(activations: &DenseMatrix, labels: &[usize], config: &KdeConfig, exec: Exec) -> Result<BaselineMi> {
    check_inputs(activations, labels, 2)?;
    config.validate()?;
    let j = activations.rows();
    let n = activations.cols();
    let sq_norms: Vec<f64> = activations.row_iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let scale = -1.0 / (2.0 * config.noise_variance);

    // Per-row (log mean over all j, log mean over same-label j), natural log.
    let blocks = exec.map_chunks(j, KDE_BLOCK, |range| -> Result<Vec<(f64, f64)>> {
        let block = activations.select_rows(&range.clone().collect::<Vec<_>>());
        let dots = block.matmul_t(activations)?;
        let mut out = Vec::with_capacity(range.len());
        let mut all = vec![0.0; j];
        let mut same = Vec::with_capacity(j);
        for (bi, i) in range.enumerate() {
            same.clear();
            let drow = dots.row(bi);
            for k in 0..j {
                let d2 = (sq_norms[i] + sq_norms[k] - 2.0 * drow[k]).max(0.0);
                let d2 = if i == k { 0.0 } else { d2 };
                all[k] = scale * d2;
                if labels[k] == labels[i] {
                    same.push(scale * d2);
                }
            }
            out.push((log_mean_exp(&all), log_mean_exp(&same)));
        }
        Ok(out)
    });
    let mut rows = Vec::with_capacity(j);
    for b in blocks {
        rows.extend(b?);
    }

    let log2e = std::f64::consts::LOG2_E;
    let i_x = 0.0 - rows.iter().map(|r| r.0).sum::<f64>() / j as f64 * log2e;
    let mut class_sum: HashMap<usize, (f64, usize)> = HashMap::new();
    for (r, &y) in rows.iter().zip(labels) {
        let e = class_sum.entry(y).or_default();
        e.0 += r.1;
        e.1 += 1;
    }
    let mut ids: Vec<_> = class_sum.keys().copied().collect();
    ids.sort_unstable();
    let cond: f64 = ids
        .iter()
        .map(|l| {
            let (s, c) = class_sum[l];
            (c as f64 / j as f64) * (-s / c as f64 * log2e)
        })
        .sum();
    let h_t_given_x = 0.5 * n as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E * config.noise_variance).log2();
    Ok(BaselineMi {
        h_t: i_x + h_t_given_x,
        i_x,
        i_y: i_x - cond,
    })
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}
