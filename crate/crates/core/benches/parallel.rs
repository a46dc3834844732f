use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use infoflow::baselines::{kde_mi_with, KdeConfig};
use infoflow::harness::{run_flow, Estimator, ExperimentConfig, Preset};
use infoflow::iid::avg_correlations;
use infoflow::{DenseMatrix, Exec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn random_layer(rows: usize, cols: usize, classes: usize) -> (DenseMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels = (0..rows).map(|j| j % classes).collect();
    (DenseMatrix::new(rows, cols, data).unwrap(), labels)
}

fn kde(c: &mut Criterion) {
    let (acts, labels) = random_layer(1024, 32, 10);
    let cfg = KdeConfig::default();
    let mut g = c.benchmark_group("kde_1024x32");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| kde_mi_with(black_box(&acts), &labels, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn correlations(c: &mut Criterion) {
    let (acts, labels) = random_layer(2000, 64, 10);
    let mut g = c.benchmark_group("avg_correlations_2000x64");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| avg_correlations(black_box(&acts), &labels, exec).unwrap())
        });
    }
    g.finish();
}

fn flow_seeds(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::from_preset(Preset::Mlp1, None);
    cfg.seeds = vec![0, 1, 2, 3];
    cfg.train.epochs = 20;
    cfg.eval_every = 5;
    cfg.estimators = vec![Estimator::Gibbs, Estimator::Binning];
    let mut g = c.benchmark_group("flow_mlp1_4seeds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_flow(black_box(&cfg), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kde, correlations, flow_seeds);
criterion_main!(benches);
