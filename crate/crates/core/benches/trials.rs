use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csi_core::harness::{run_ce_sweep, ExperimentConfig, Task};
use csi_core::heads::{adam_train, ClassSample, DenseHead, Loss, TrainConfig};
use csi_core::par::Parallelism;

fn sweep_config(workers: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Task::CeSweep);
    cfg.m = 32;
    cfg.n = 32;
    cfg.path_counts = vec![6];
    cfg.snr_db_list = vec![5.0];
    cfg.trials = 16;
    cfg.covariance_samples = 100;
    cfg.workers = workers;
    cfg
}

fn ce_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("ce_sweep_trials");
    group.sample_size(10);
    for (label, workers) in [("sequential", 1), ("parallel", 0)] {
        let cfg = sweep_config(workers);
        group.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| run_ce_sweep(cfg).unwrap())
        });
    }
    group.finish();
}

fn head_training(c: &mut Criterion) {
    let data: Vec<ClassSample> = (0..512)
        .map(|i| {
            let label = i % 7;
            let features = (0..256).map(|j| if j % 7 == label { 1.0 } else { 0.01 * (i % 5) as f64 }).collect();
            ClassSample { features, label }
        })
        .collect();
    let mut group = c.benchmark_group("dense_training");
    group.sample_size(10);
    for (label, parallelism) in [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Auto)] {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 128,
            parallelism,
            ..TrainConfig::default()
        };
        group.bench_function(label, |b| {
            b.iter(|| adam_train(DenseHead::init(256, 7, 0), &data, Loss::CrossEntropy, &cfg, |_, _| {}).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ce_trials, head_training);
criterion_main!(benches);
