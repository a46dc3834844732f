use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use infoflow::data::{entropy_budget, export_synthetic, generate_synthetic, SyntheticSpec};
use infoflow::harness::{
    compare_estimators, emit_charts, read_trace_csv, run_flow, run_generalization, run_iid, DatasetConfig, Estimator,
    ExperimentConfig, FlowTrace, Preset, Sweep, CONVERGED_LOSS,
};
use infoflow::nn::{init_weights, save_snapshot, train};
use infoflow::Exec;

/// Information flow in multilayer perceptrons via per-layer Gibbs measures.
#[derive(Parser)]
#[command(name = "infoflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic rotation dataset (train and held-out) as IDX files.
    GenData(GenDataArgs),
    /// Train one network per seed and save weight snapshots.
    Train(RunArgs),
    /// Record per-layer information flow over training.
    Flow(RunArgs),
    /// Flow with several estimators fed from the same training runs.
    Compare(RunArgs),
    /// Activation correlations and weight conditions over training.
    Iid(IidArgs),
    /// Test accuracy vs I(Xbar, F_1) across widths or training-set sizes.
    Generalization(GenArgs),
    /// Render SVG charts from a flow CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named architecture with its default schedule.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated estimators from gibbs, binning, kde.
    #[arg(long, value_parser = parse_estimators)]
    estimators: Option<Vec<Estimator>>,
    /// Override the number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the evaluation interval.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Directory with the MNIST IDX files (benchmark presets).
    #[arg(long, env = "MNIST_DIR")]
    mnist_dir: Option<PathBuf>,
    /// Use a random subset of this many training images (IDX datasets).
    #[arg(long)]
    train_subset: Option<usize>,
    /// Use a random subset of this many held-out images (IDX datasets).
    #[arg(long)]
    test_subset: Option<usize>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Skip chart rendering.
    #[arg(long)]
    no_charts: bool,
}

#[derive(Args)]
struct IidArgs {
    #[command(flatten)]
    common: Common,
    /// Also write the final |r| matrices as PGM heatmaps.
    #[arg(long)]
    matrices: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',', conflicts_with = "train_sizes")]
    widths: Option<Vec<usize>>,
    /// Comma-separated training-set sizes.
    #[arg(long, value_delimiter = ',')]
    train_sizes: Option<Vec<usize>>,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON experiment config whose dataset is synthetic.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the training draw; the held-out draw uses seed + 1.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    per_rotation: Option<usize>,
    #[arg(long)]
    noise_variance: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Flow CSV written by `flow` or `compare`.
    trace: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference line for I(X,F) charts, bits.
    #[arg(long)]
    cap: Option<f64>,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: infoflow::Error| e.to_string())
}

fn parse_estimators(s: &str) -> std::result::Result<Vec<Estimator>, String> {
    Estimator::parse_list(s).map_err(|e| e.to_string())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Flow(a) => flow_cmd(a, false),
        Command::Compare(a) => flow_cmd(a, true),
        Command::Iid(a) => iid_cmd(a),
        Command::Generalization(a) => generalization_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

impl Common {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    fn resolve(&self, default_estimators: &[Estimator]) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::from_json_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            (None, Some(p)) => {
                let mut c = ExperimentConfig::from_preset(p, self.mnist_dir.as_deref());
                c.estimators = default_estimators.to_vec();
                c
            }
            (None, None) => bail!("either --config or --preset is required"),
        };
        if let Some(s) = &self.seeds {
            c.seeds = s.clone();
        }
        if let Some(e) = &self.estimators {
            c.estimators = e.clone();
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(e) = self.eval_every {
            c.eval_every = e;
        }
        if let DatasetConfig::Idx {
            train_subset,
            test_subset,
            ..
        } = &mut c.dataset
        {
            if self.train_subset.is_some() {
                *train_subset = self.train_subset;
            }
            if self.test_subset.is_some() {
                *test_subset = self.test_subset;
            }
        }
        if let Some(o) = &self.out {
            c.output_dir = Some(o.clone());
        }
        if c.output_dir.is_none() {
            c.output_dir = Some(PathBuf::from("runs").join(&c.name));
        }
        c.validate()?;
        Ok(c)
    }
}

fn synthetic_cap(c: &ExperimentConfig) -> Option<f64> {
    match &c.dataset {
        DatasetConfig::Synthetic { spec } => Some(entropy_budget(spec).total_bits),
        DatasetConfig::Idx { .. } => None,
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => match ExperimentConfig::from_json_file(p)?.dataset {
            DatasetConfig::Synthetic { spec } => spec,
            DatasetConfig::Idx { .. } => bail!("config dataset is not synthetic"),
        },
        None => SyntheticSpec::default(),
    };
    if let Some(s) = a.seeds.as_ref().and_then(|s| s.first()) {
        spec.seed = *s;
    }
    if let Some(n) = a.per_rotation {
        spec.per_rotation_count = n;
    }
    if let Some(v) = a.noise_variance {
        spec.noise_variance = v;
    }
    let train = generate_synthetic(&spec)?;
    let test_spec = SyntheticSpec {
        seed: spec.seed.wrapping_add(1),
        ..spec
    };
    let test = generate_synthetic(&test_spec)?;
    export_synthetic(&spec, &train, &a.out, "train")?;
    export_synthetic(&test_spec, &test, &a.out, "test")?;
    let b = entropy_budget(&spec);
    println!(
        "wrote {} + {} samples to {} (H(X) = {:.3} bits, H(Y) = {} bit)",
        train.len(),
        test.len(),
        a.out.display(),
        b.total_bits,
        b.label_bits
    );
    Ok(())
}

fn train_cmd(a: RunArgs) -> Result<()> {
    let c = a.common.resolve(&[Estimator::Gibbs])?;
    let dir = c.output_dir.clone().expect("resolved");
    c.write_resolved(&dir)?;
    let (data, _) = c.dataset.load()?;
    for &seed in &c.seeds {
        let mut mlp = c.build_network()?;
        init_weights(&mut mlp, c.train.init, seed)?;
        let tc = infoflow::nn::TrainConfig { seed, ..c.train.clone() };
        let reports = train(&mut mlp, &data, &tc)?;
        let mut log = BufWriter::new(File::create(dir.join(format!("train-seed{seed}.csv")))?);
        writeln!(log, "epoch,loss,train_error")?;
        for r in &reports {
            writeln!(log, "{},{},{}", r.epoch, r.loss, r.train_error)?;
        }
        log.flush()?;
        save_snapshot(&mlp, dir.join(format!("weights-seed{seed}.bin")))?;
        let (ce, err) = mlp.evaluate(&data.inputs, &data.labels)?;
        println!(
            "seed {seed}: loss {:.3e} nats, train error {:.4}{}",
            ce.nats,
            err,
            if ce.nats < CONVERGED_LOSS { " (converged)" } else { "" }
        );
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn flow_cmd(a: RunArgs, compare: bool) -> Result<()> {
    let defaults: &[Estimator] = if compare {
        &[Estimator::Gibbs, Estimator::Binning, Estimator::Kde]
    } else {
        &[Estimator::Gibbs]
    };
    let c = a.common.resolve(defaults)?;
    let exec = a.common.exec();
    let trace = if compare { compare_estimators(&c, exec)? } else { run_flow(&c, exec)? };
    let dir = c.output_dir.clone().expect("resolved");
    for f in &trace.failures {
        eprintln!("seed {} failed at epoch {}: {}", f.seed, f.epoch, f.message);
    }
    print_final(&trace);
    if !a.no_charts {
        let files = emit_charts(&trace, &dir, synthetic_cap(&c))?;
        println!("{} charts", files.len());
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn print_final(trace: &FlowTrace) {
    let Some(last) = trace.rows.iter().map(|r| r.epoch).max() else {
        return;
    };
    println!("epoch {last}, seed mean:");
    println!("{:<8} {:>5} {:>8} {:>8} {:>8} {:>8}", "est", "layer", "H_F", "I_X", "I_Y", "I_Xbar");
    for est in trace.estimators() {
        for layer in trace.layers() {
            let rows: Vec<_> = trace
                .rows
                .iter()
                .filter(|r| r.epoch == last && r.estimator == est && r.layer == layer)
                .collect();
            let n = rows.len() as f64;
            let m = |f: fn(&infoflow::harness::FlowRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            println!(
                "{:<8} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                est.name(),
                layer + 1,
                m(|r| r.h_f),
                m(|r| r.i_x),
                m(|r| r.i_y),
                m(|r| r.i_xbar)
            );
        }
    }
}

fn iid_cmd(a: IidArgs) -> Result<()> {
    let c = a.common.resolve(&[Estimator::Gibbs])?;
    let r = run_iid(&c, a.matrices, a.common.exec())?;
    println!(
        "inputs: r_same {:.3}, r_diff {:.3}",
        r.input.r_same, r.input.r_diff
    );
    for x in r.final_correlations() {
        println!(
            "epoch {} layer {}: r_same {:.3}, r_diff {:.3}",
            x.epoch,
            x.layer + 1,
            x.r_same,
            x.r_diff
        );
    }
    println!("outputs in {}", c.output_dir.as_deref().unwrap_or(Path::new(".")).display());
    Ok(())
}

fn generalization_cmd(a: GenArgs) -> Result<()> {
    let c = a.common.resolve(&[Estimator::Gibbs])?;
    let sweep = match (a.widths, a.train_sizes) {
        (Some(w), None) => Sweep::Widths(w),
        (None, Some(n)) => Sweep::TrainSizes(n),
        _ => bail!("give exactly one of --widths or --train-sizes"),
    };
    let t = run_generalization(&c, &sweep, a.common.exec())?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>7}", "setting", "train_acc", "test_acc", "I_Xbar_F1", "epochs");
    for r in &t.rows {
        println!(
            "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>7}{}",
            r.setting,
            r.train_accuracy,
            r.test_accuracy,
            r.i_xbar_f1,
            r.epochs_run,
            if r.reached_full_accuracy { "" } else { "  (epoch cap)" }
        );
    }
    match t.spearman {
        Some(s) => println!("spearman(test accuracy, I_Xbar_F1) = {s:.3}"),
        None => println!("spearman undefined"),
    }
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let trace = read_trace_csv(File::open(&a.trace).with_context(|| format!("opening {}", a.trace.display()))?)?;
    let out = a
        .out
        .unwrap_or_else(|| a.trace.parent().map(Path::to_path_buf).unwrap_or_default());
    let files = emit_charts(&trace, &out, a.cap)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
