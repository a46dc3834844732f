use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::data::{subset, Dataset};
use crate::error::{Error, Result};
use crate::gibbs::{mi_x, mi_xbar, mi_y, LayerGibbs};
use crate::nn::{error_rate, init_weights, train_with, LayerSpec, TrainConfig};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    /// Every hidden layer gets the same width.
    Widths(Vec<usize>),
    /// Training set reduced to a seeded subset of each size.
    TrainSizes(Vec<usize>),
}

impl Sweep {
    pub fn settings(&self) -> &[usize] {
        match self {
            Sweep::Widths(v) | Sweep::TrainSizes(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub setting: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `I(X̄, F_1)` on the training set, bits.
    pub i_xbar_f1: f64,
    /// False when the epoch cap was hit before 100% train accuracy.
    pub reached_full_accuracy: bool,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationTable {
    pub rows: Vec<GeneralizationRow>,
    /// Spearman correlation of test accuracy against `I(X̄, F_1)`; `None`
    /// for fewer than two rows or a constant column.
    pub spearman: Option<f64>,
}

/// Trains one network per sweep setting (first seed of `config`), each until
/// it classifies the whole training set correctly or `config.train.epochs`
/// runs out. The full-set check runs after every epoch whose running
/// minibatch error was zero. Settings are independent jobs under `exec`.
pub fn run_generalization(config: &ExperimentConfig, sweep: &Sweep, exec: Exec) -> Result<GeneralizationTable> {
    config.validate()?;
    if sweep.settings().is_empty() {
        return Err(Error::InvalidArgument("sweep has no settings".into()));
    }
    let (train, test) = config.dataset.load()?;
    let test = test.ok_or_else(|| Error::InvalidArgument("generalization sweep needs a held-out set".into()))?;

    let jobs = exec.map(sweep.settings().len(), |k| {
        let setting = sweep.settings()[k];
        match sweep {
            Sweep::Widths(_) => {
                let arch = with_hidden_width(&config.architecture, setting)?;
                run_setting(config, &arch, setting, &train, &test)
            }
            Sweep::TrainSizes(_) => {
                let sub = subset(&train, setting, config.seeds[0])?;
                run_setting(config, &config.architecture, setting, &sub, &test)
            }
        }
    });
    let rows = jobs.into_iter().collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = rows.iter().map(|r| r.test_accuracy).collect();
    let info: Vec<f64> = rows.iter().map(|r| r.i_xbar_f1).collect();
    let table = GeneralizationTable {
        spearman: spearman(&acc, &info),
        rows,
    };
    if let Some(dir) = &config.output_dir {
        config.write_resolved(dir)?;
        std::fs::write(dir.join("generalization.json"), serde_json::to_string_pretty(&table)?)?;
    }
    Ok(table)
}

fn with_hidden_width(arch: &[LayerSpec], width: usize) -> Result<Vec<LayerSpec>> {
    let last = arch.len() - 1;
    arch.iter()
        .enumerate()
        .map(|(i, s)| {
            let fan_in = if i == 0 { s.fan_in } else { width };
            let fan_out = if i == last { s.fan_out } else { width };
            LayerSpec::new(fan_in, fan_out, s.activation)
        })
        .collect()
}

fn run_setting(
    config: &ExperimentConfig,
    arch: &[LayerSpec],
    setting: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<GeneralizationRow> {
    let seed = config.seeds[0];
    let mut mlp = crate::nn::Mlp::new(arch)?;
    init_weights(&mut mlp, config.train.init, seed)?;
    let tc = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let mut full = false;
    let mut epochs_run = 0;
    let mut eval_err = None;
    train_with(&mut mlp, train, &tc, |m, rep| {
        epochs_run = rep.epoch;
        if rep.train_error > 0.0 {
            return ControlFlow::Continue(());
        }
        match m.forward(&train.inputs) {
            Ok(t) if error_rate(&t.predictions(), &train.labels) == 0.0 => {
                full = true;
                ControlFlow::Break(())
            }
            Ok(_) => ControlFlow::Continue(()),
            Err(e) => {
                eval_err = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = eval_err {
        return Err(e);
    }

    let trace = mlp.forward(&train.inputs)?;
    let train_accuracy = 1.0 - error_rate(&trace.predictions(), &train.labels);
    let f1 = LayerGibbs::from_activations(&trace.activations[0], 0)?;
    let i_xbar_f1 = mi_xbar(mi_x(&f1), mi_y(&f1, &train.labels)?);
    let test_accuracy = 1.0 - error_rate(&mlp.forward(&test.inputs)?.predictions(), &test.labels);
    Ok(GeneralizationRow {
        setting,
        train_accuracy,
        test_accuracy,
        i_xbar_f1,
        reached_full_accuracy: full || train_accuracy == 1.0,
        epochs_run,
    })
}

/// Spearman rank correlation with tied values given their average rank.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    crate::iid::sample_correlation(&ranks(a), &ranks(b)).ok()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut r = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &idx[start..end] {
            r[i] = avg;
        }
        start = end;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_edge_cases() {
        assert_eq!(spearman(&[1.0], &[2.0]), None);
        assert_eq!(spearman(&[1.0, 1.0], &[2.0, 3.0]), None);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 90.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[5.0, 4.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hidden_widths_are_replaced() {
        let arch = crate::harness::Preset::Mlp4.specs();
        let w = with_hidden_width(&arch, 64).unwrap();
        assert_eq!(
            w.iter().map(|s| (s.fan_in, s.fan_out)).collect::<Vec<_>>(),
            vec![(784, 64), (64, 64), (64, 10)]
        );
    }
}
