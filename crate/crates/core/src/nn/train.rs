use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::InitScheme;
use super::network::{cross_entropy, Mlp};
use super::optim::{Optimizer, OptimizerKind};
use crate::data::Dataset;
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub init: InitScheme,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            epochs: 1000,
            batch_size: 0,
            init: InitScheme::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero rate is accepted: it freezes the weights, which is a
        // useful control run.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        self.init.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's batches, measured before each update (nats).
    pub loss: f64,
    /// Misclassification rate over the same forward passes.
    pub train_error: f64,
}

pub fn train(mlp: &mut Mlp, data: &Dataset, config: &TrainConfig) -> Result<Vec<EpochReport>> {
    let mut reports = Vec::with_capacity(config.epochs);
    train_with(mlp, data, config, |_, r| {
        reports.push(*r);
        ControlFlow::Continue(())
    })?;
    Ok(reports)
}

/// Trains in place, invoking `on_epoch` after every epoch's updates.
/// Returning `Break` stops early. Shuffling is driven by `config.seed`, so
/// a run is bitwise reproducible.
pub fn train_with<F>(mlp: &mut Mlp, data: &Dataset, config: &TrainConfig, mut on_epoch: F) -> Result<usize>
where
    F: FnMut(&Mlp, &EpochReport) -> ControlFlow<()>,
{
    config.validate()?;
    let j = data.len();
    if j == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    if data.input_dim() != mlp.input_dim() {
        return Err(shape_err("train", format!("{} input features", mlp.input_dim()), data.input_dim()));
    }
    if data.num_classes > mlp.num_classes() {
        return Err(shape_err("train", format!("at most {} classes", mlp.num_classes()), data.num_classes));
    }
    let batch = if config.batch_size == 0 { j } else { config.batch_size.min(j) };
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, mlp);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..j).collect();

    for epoch in 1..=config.epochs {
        if batch < j {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut wrong = 0usize;
        for chunk in order.chunks(batch) {
            let (inputs, labels) = if batch == j {
                (data.inputs.clone(), data.labels.clone())
            } else {
                (data.inputs.select_rows(chunk), chunk.iter().map(|&i| data.labels[i]).collect())
            };
            let trace = mlp.forward(&inputs)?;
            if let Some(layer) = trace.first_non_finite_layer() {
                return Err(Error::Diverged { epoch, layer });
            }
            let ce = cross_entropy(trace.output(), &labels)?;
            if !ce.nats.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    layer: mlp.depth() - 1,
                });
            }
            loss_sum += ce.nats * labels.len() as f64;
            wrong += trace
                .predictions()
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p != l)
                .count();
            let grads = mlp.backward(&trace, &labels)?;
            optimizer.step(mlp, &grads);
        }
        let report = EpochReport {
            epoch,
            loss: loss_sum / j as f64,
            train_error: wrong as f64 / j as f64,
        };
        if on_epoch(mlp, &report).is_break() {
            return Ok(epoch);
        }
    }
    Ok(config.epochs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_weights, ActivationKind};
    use crate::DenseMatrix;

    fn toy() -> Dataset {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.7;
                let c = if i % 2 == 0 { 1.0 } else { -1.0 };
                [c + 0.3 * t.sin(), 0.5 * t.cos()]
            })
            .collect();
        let labels = (0..40).map(|i| i % 2).collect();
        Dataset::new(DenseMatrix::from_rows(&rows).unwrap(), labels, 2, "toy").unwrap()
    }

    fn fresh(seed: u64) -> Mlp {
        let mut m = Mlp::with_widths(2, &[5], 2, ActivationKind::Tanh).unwrap();
        init_weights(&mut m, InitScheme::Uniform { a: 0.5 }, seed).unwrap();
        m
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        let mut m = fresh(3);
        let before = m.clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 20,
            ..TrainConfig::default()
        };
        train(&mut m, &toy(), &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 8,
            seed: 11,
            ..TrainConfig::default()
        };
        let (mut a, mut b) = (fresh(1), fresh(1));
        let ra = train(&mut a, &toy(), &cfg).unwrap();
        let rb = train(&mut b, &toy(), &cfg).unwrap();
        assert_eq!(ra, rb);
        let bits = |m: &Mlp| -> Vec<u64> {
            m.layers()
                .iter()
                .flat_map(|l| l.weights.as_slice().iter().chain(&l.biases).map(|v| v.to_bits()).collect::<Vec<_>>())
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn adam_learns_separable_toy() {
        let mut m = fresh(5);
        let reports = train(&mut m, &toy(), &TrainConfig { epochs: 200, ..TrainConfig::default() }).unwrap();
        assert!(reports.last().unwrap().loss < reports[0].loss);
        assert_eq!(reports.last().unwrap().train_error, 0.0);
    }

    #[test]
    fn divergence_is_reported_with_epoch_and_layer() {
        let mut m = fresh(2);
        m.layers_mut()[1].weights.set(0, 0, f64::INFINITY);
        let err = train(&mut m, &toy(), &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, layer: 1 }), "{err}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut m = fresh(0);
        for cfg in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
            TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() },
        ] {
            assert!(train(&mut m, &toy(), &cfg).is_err());
        }
    }
}
