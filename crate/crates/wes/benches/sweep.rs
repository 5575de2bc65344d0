//! Grid-execution benchmarks.
//!
//! With the default `parallel` feature this measures the rayon path at one
//! and at several workers; `cargo bench --no-default-features` measures the
//! sequential fallback, so the two builds can be compared directly.

use criterion::{criterion_group, criterion_main, Criterion};
use wes::curvegen::{default_label_curve, DistributionKind};
use wes::network::TrainConfig;
use wes::runner::{run_experiment, ExperimentConfig};

/// A grid small enough to iterate: 4 cells, 2 epochs each.
fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        distributions: vec![DistributionKind::Unimodal],
        sigmas: vec![0.05],
        losses: vec!["mse".into(), "wes:8".into()],
        betas: vec![8.0],
        ensemble_size: 2,
        train: TrainConfig {
            epochs: 2,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn bench_sweep(c: &mut Criterion) {
    std::env::set_var("WES_QUIET", "1");
    let config = tiny_config();
    let mut group = c.benchmark_group("sweep_grid");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel_workers_1", |b| {
            b.iter(|| run_experiment(&config, 1).unwrap())
        });
        let cpus = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        if cpus > 1 {
            group.bench_function(format!("parallel_workers_{cpus}"), |b| {
                b.iter(|| run_experiment(&config, cpus).unwrap())
            });
        }
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| run_experiment(&config, 1).unwrap())
    });
    group.finish();
}

fn bench_curve(c: &mut Criterion) {
    let mut group = c.benchmark_group("label_curve");
    group.sample_size(20);
    group.bench_function("unimodal_40k", |b| {
        b.iter(|| default_label_curve(DistributionKind::Unimodal).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_curve);
criterion_main!(benches);
