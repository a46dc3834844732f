use std::fs::File;
use std::io::BufWriter;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::iid::{
    avg_correlations, correlation_matrix, identical_condition, independence_condition, write_pgm, AvgCorrelations,
    CorrelationReport, WeightConditionReport, DEFAULT_MATRIX_CAP,
};
use crate::nn::{error_rate, init_weights, train_with, Mlp, TrainConfig};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfPoint {
    pub epoch: usize,
    pub layer: usize,
    pub r_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IidResult {
    /// Correlations of the held-out inputs themselves.
    pub input: AvgCorrelations,
    /// Per layer at epoch 0, every `eval_every` epochs, and the last epoch.
    pub correlations: Vec<CorrelationReport>,
    pub weights: Vec<WeightConditionReport>,
    /// Mean off-diagonal `|ωᵀω|` of every layer after every epoch.
    pub r_f: Vec<RfPoint>,
    /// Error rate of the final network on the whole training set.
    pub train_error: f64,
}

impl IidResult {
    pub fn final_correlations(&self) -> Vec<CorrelationReport> {
        let last = self.correlations.iter().map(|c| c.epoch).max().unwrap_or(0);
        self.correlations.iter().filter(|c| c.epoch == last).copied().collect()
    }
}

/// Trains the first seed of `config` and tracks the i.i.d. diagnostics on
/// the held-out set. With `write_matrices`, the final `|r|` matrix of every
/// layer is written as a PGM heatmap (held-out set capped at 5000).
pub fn run_iid(config: &ExperimentConfig, write_matrices: bool, exec: Exec) -> Result<IidResult> {
    config.validate()?;
    let (train, test) = config.dataset.load()?;
    let heldout = test.ok_or_else(|| Error::InvalidArgument("correlation diagnostics need a held-out set".into()))?;
    let seed = config.seeds[0];
    let mut mlp = config.build_network()?;
    init_weights(&mut mlp, config.train.init, seed)?;

    let input = avg_correlations(&heldout.inputs, &heldout.labels, exec)?;
    let mut result = IidResult {
        input,
        correlations: Vec::new(),
        weights: Vec::new(),
        r_f: rf_points(&mlp, 0)?,
        train_error: f64::NAN,
    };
    checkpoint(&mlp, 0, &heldout, exec, &mut result)?;

    let epochs = config.train.epochs;
    if epochs > 0 {
        let tc = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let mut err = None;
        train_with(&mut mlp, &train, &tc, |m, rep| {
            let step = rf_points(m, rep.epoch).and_then(|p| {
                result.r_f.extend(p);
                if rep.epoch % config.eval_every == 0 || rep.epoch == epochs {
                    checkpoint(m, rep.epoch, &heldout, exec, &mut result)
                } else {
                    Ok(())
                }
            });
            match step {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => {
                    err = Some(e);
                    ControlFlow::Break(())
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
    }

    result.train_error = error_rate(&mlp.forward(&train.inputs)?.predictions(), &train.labels);

    if let Some(dir) = &config.output_dir {
        config.write_resolved(dir)?;
        write_csv(dir.join("correlations.csv"), &result.correlations)?;
        write_csv(dir.join("weights.csv"), &result.weights)?;
        write_csv(dir.join("rf.csv"), &result.r_f)?;
        if write_matrices {
            let n = heldout.len().min(DEFAULT_MATRIX_CAP);
            let sub = heldout.select(&(0..n).collect::<Vec<_>>(), "matrix cap");
            let trace = mlp.forward(&sub.inputs)?;
            for (i, acts) in trace.activations.iter().enumerate() {
                let m = correlation_matrix(acts, &sub.labels, DEFAULT_MATRIX_CAP, exec)?;
                write_pgm(&m.abs_r, dir.join(format!("corr_layer{i}.pgm")))?;
            }
        }
    }
    Ok(result)
}

fn rf_points(mlp: &Mlp, epoch: usize) -> Result<Vec<RfPoint>> {
    mlp.layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.fan_out() >= 2)
        .map(|(i, l)| {
            Ok(RfPoint {
                epoch,
                layer: i,
                r_f: independence_condition(&l.weights)?.mean_offdiag,
            })
        })
        .collect()
}

fn checkpoint(mlp: &Mlp, epoch: usize, heldout: &Dataset, exec: Exec, out: &mut IidResult) -> Result<()> {
    let trace = mlp.forward(&heldout.inputs)?;
    if let Some(layer) = trace.first_non_finite_layer() {
        return Err(Error::Diverged { epoch, layer });
    }
    for (i, acts) in trace.activations.iter().enumerate() {
        let c = avg_correlations(acts, &heldout.labels, exec)?;
        out.correlations.push(CorrelationReport {
            epoch,
            layer: i,
            r_same: c.r_same,
            r_diff: c.r_diff,
            constant_rows: c.constant_rows,
        });
        let layer = &mlp.layers()[i];
        if layer.fan_out() < 2 {
            continue;
        }
        let prev = if i == 0 { &heldout.inputs } else { &trace.activations[i - 1] };
        let mean_prev = prev.as_slice().iter().sum::<f64>() / prev.as_slice().len() as f64;
        let id = identical_condition(&layer.weights, &layer.biases, mean_prev)?;
        out.weights.push(WeightConditionReport {
            epoch,
            layer: i,
            r_f: independence_condition(&layer.weights)?.mean_offdiag,
            fitted_slope: id.fitted_slope,
            expected_slope: id.expected_slope,
        });
    }
    Ok(())
}

fn write_csv<T: Serialize>(path: std::path::PathBuf, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
