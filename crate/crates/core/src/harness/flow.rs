use std::fs::File;
use std::io::BufWriter;
use std::ops::ControlFlow;

use super::trace::{write_trace_csv, FlowRow, FlowTrace, SeedFailure};
use super::{Estimator, EvalSet, ExperimentConfig};
use crate::baselines::{binned_mi, kde_mi_with, BinningConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gibbs::summaries_from_trace;
use crate::nn::{cross_entropy, error_rate, init_weights, train_with, Mlp, TrainConfig};
use crate::par::Exec;

/// Trains one network per seed and records every selected estimator on
/// every layer at epoch 0, every `eval_every` epochs, and the final epoch.
///
/// Seeds run as independent jobs under `exec`; their rows are merged in
/// (seed, epoch, estimator, layer) order. A seed that hits a non-finite
/// value keeps the rows recorded so far and is listed in
/// [`FlowTrace::failures`]. When `output_dir` is set, the trace
/// (`flow.csv`), any failures (`failures.json`) and the resolved config
/// are written there.
pub fn run_flow(config: &ExperimentConfig, exec: Exec) -> Result<FlowTrace> {
    config.validate()?;
    let (train, test) = config.dataset.load()?;
    let probe = config.build_network()?;
    if probe.input_dim() != train.input_dim() {
        return Err(crate::error::shape_err(
            "architecture vs dataset",
            format!("{} input features", probe.input_dim()),
            train.input_dim(),
        ));
    }
    let mi_data = match config.mi_on {
        EvalSet::Train => &train,
        EvalSet::Test => test
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("mi_on = test needs a held-out set".into()))?,
    };

    let jobs = exec.map(config.seeds.len(), |k| {
        run_seed(config, config.seeds[k], &train, test.as_ref(), mi_data, exec)
    });
    let mut trace = FlowTrace::default();
    for job in jobs {
        let (rows, failure) = job?;
        trace.rows.extend(rows);
        trace.failures.extend(failure);
    }
    trace.sort();
    trace.failures.sort_by_key(|f| f.seed);

    if let Some(dir) = &config.output_dir {
        config.write_resolved(dir)?;
        write_trace_csv(&trace, BufWriter::new(File::create(dir.join("flow.csv"))?))?;
        if !trace.failures.is_empty() {
            std::fs::write(dir.join("failures.json"), serde_json::to_string_pretty(&trace.failures)?)?;
        }
    }
    Ok(trace)
}

/// [`run_flow`] with at least two estimators, all fed from the same
/// training run of each seed.
pub fn compare_estimators(config: &ExperimentConfig, exec: Exec) -> Result<FlowTrace> {
    if config.estimators.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "comparison needs at least two estimators, got {}",
            config.estimators.len()
        )));
    }
    run_flow(config, exec)
}

fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    train: &Dataset,
    test: Option<&Dataset>,
    mi_data: &Dataset,
    exec: Exec,
) -> Result<(Vec<FlowRow>, Option<SeedFailure>)> {
    let mut mlp = config.build_network()?;
    init_weights(&mut mlp, config.train.init, seed)?;
    let mut rows = evaluate(config, &mlp, seed, 0, train, test, mi_data, exec)?;
    let epochs = config.train.epochs;
    if epochs == 0 {
        return Ok((rows, None));
    }
    let tc = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let mut eval_err = None;
    let outcome = train_with(&mut mlp, train, &tc, |m, rep| {
        if rep.epoch % config.eval_every == 0 || rep.epoch == epochs {
            match evaluate(config, m, seed, rep.epoch, train, test, mi_data, exec) {
                Ok(r) => rows.extend(r),
                Err(e) => {
                    eval_err = Some(e);
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    });
    let err = match (outcome, eval_err) {
        (_, Some(e)) | (Err(e), None) => e,
        (Ok(_), None) => return Ok((rows, None)),
    };
    match err {
        Error::Diverged { epoch, .. } => Ok((
            rows,
            Some(SeedFailure {
                seed,
                epoch,
                message: err.to_string(),
            }),
        )),
        other => Err(other),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    config: &ExperimentConfig,
    mlp: &Mlp,
    seed: u64,
    epoch: usize,
    train: &Dataset,
    test: Option<&Dataset>,
    mi_data: &Dataset,
    exec: Exec,
) -> Result<Vec<FlowRow>> {
    let train_trace = mlp.forward(&train.inputs)?;
    if let Some(layer) = train_trace.first_non_finite_layer() {
        return Err(Error::Diverged { epoch, layer });
    }
    let loss = cross_entropy(train_trace.output(), &train.labels)?.nats;
    let train_error = error_rate(&train_trace.predictions(), &train.labels);
    let test_error = match test {
        Some(t) => Some(error_rate(&mlp.forward(&t.inputs)?.predictions(), &t.labels)),
        None => None,
    };
    let mi_trace = if std::ptr::eq(mi_data, train) {
        train_trace
    } else {
        mlp.forward(&mi_data.inputs)?
    };

    let mut rows = Vec::new();
    let row = |estimator, layer, h_f, i_x, i_y| FlowRow {
        seed,
        epoch,
        loss,
        train_error,
        test_error,
        estimator,
        layer,
        h_f,
        i_x,
        i_y,
        i_xbar: i_x - i_y,
    };
    for &est in &config.estimators {
        match est {
            Estimator::Gibbs => {
                for s in summaries_from_trace(&mi_trace, &mi_data.labels)? {
                    rows.push(FlowRow {
                        i_xbar: s.i_xbar,
                        ..row(est, s.layer, s.h_f, s.i_x, s.i_y)
                    });
                }
            }
            Estimator::Binning => {
                for (i, acts) in mi_trace.activations.iter().enumerate() {
                    let kind = mlp.layers()[i].activation;
                    let cfg = BinningConfig::for_activation(kind, acts, config.num_bins);
                    let b = binned_mi(acts, &mi_data.labels, &cfg)?;
                    rows.push(row(est, i, b.h_t, b.i_x, b.i_y));
                }
            }
            Estimator::Kde => {
                for (i, acts) in mi_trace.activations.iter().enumerate() {
                    let k = kde_mi_with(acts, &mi_data.labels, &config.kde, exec)?;
                    rows.push(row(est, i, k.h_t, k.i_x, k.i_y));
                }
            }
        }
    }
    Ok(rows)
}
