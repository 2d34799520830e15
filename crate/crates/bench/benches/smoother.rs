// SPDX-License-Identifier: MIT OR Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use tsbreak_bench::{global_fixture, row_fixture};
use tsbreak_core::admm::{theta_update, theta_update_with};
use tsbreak_core::kalman::{smooth_row, SmootherSchedule};

fn bench_smooth_row(c: &mut Criterion) {
    let mut group = c.benchmark_group("smooth_row");
    for t in [250, 500, 1000, 2000] {
        let problem = row_fixture(t, 5, 1, 1);
        group.throughput(Throughput::Elements(t as u64));
        group.bench_with_input(BenchmarkId::from_parameter(t), &problem, |b, p| {
            b.iter(|| smooth_row(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn bench_theta_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta_update");
    for t in [250, 500, 1000, 2000] {
        let (design, w, omega) = global_fixture(t, 5, 1, 2);
        group.throughput(Throughput::Elements(t as u64));
        group.bench_with_input(BenchmarkId::new("with_schedule_build", t), &t, |b, _| {
            b.iter(|| theta_update(&design, black_box(&w), black_box(&omega), 1.0).unwrap())
        });
        let schedule = SmootherSchedule::new(design.regressors(), 1.0).unwrap();
        group.bench_with_input(BenchmarkId::new("cached_schedule", t), &t, |b, _| {
            b.iter(|| {
                theta_update_with(&schedule, &design, black_box(&w), black_box(&omega)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_smooth_row, bench_theta_update);
criterion_main!(benches);
