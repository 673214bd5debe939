//! Parallel versus serial throughput for the replicate-level Monte Carlo
//! entry points. The two paths produce identical output by construction;
//! this measures what the `parallel` feature buys.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twophase::model::{DownCrossing, DriftFunction, TwoPhaseModel};
use twophase::simulate::{estimate_speed, sample_cycles, sample_cycles_serial, PathConfig};

fn model() -> TwoPhaseModel {
    TwoPhaseModel::new(
        DriftFunction::Constant(1.0),
        DriftFunction::Constant(0.5),
        DownCrossing::Constant(1.0),
        1.0,
        0.0,
    )
}

fn bench_cycles(c: &mut Criterion) {
    let m = model();
    let cfg = PathConfig::new(1e-3, 100.0, 1);
    let mut group = c.benchmark_group("regeneration_cycles");
    group.sample_size(10);
    for &n in &[64usize, 256] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| sample_cycles(&m, &cfg, n))
        });
        group.bench_with_input(BenchmarkId::new("serial", n), &n, |b, &n| {
            b.iter(|| sample_cycles_serial(&m, &cfg, n))
        });
    }
    group.finish();
}

fn bench_speed(c: &mut Criterion) {
    let m = model();
    let cfg = PathConfig::new(1e-2, 50.0, 2);
    let mut group = c.benchmark_group("speed_estimator");
    group.sample_size(10);
    group.bench_function("parallel_feature_default", |b| {
        b.iter(|| estimate_speed(&m, &cfg, 32))
    });
    group.finish();
}

criterion_group!(benches, bench_cycles, bench_speed);
criterion_main!(benches);
