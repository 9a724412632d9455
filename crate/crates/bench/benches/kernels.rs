use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dynasty_bench::{mixed_population, ramp_spec, step_spec, tanh_spec};
use dynasty_core::{
    effort_curve, find_equilibrium, optimal_effort, round_trip_error, step_generation,
    EquilibriumOptions, TransferSpec,
};

fn bench_optimal_effort(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimal_effort");
    let smooth = tanh_spec();
    group.bench_function("tanh_growth", |b| {
        b.iter(|| optimal_effort(black_box(1.3), black_box(1.0), &smooth))
    });
    let step = step_spec();
    group.bench_function("step", |b| {
        b.iter(|| optimal_effort(black_box(0.8), black_box(1.0), &step))
    });
    let ramp = ramp_spec();
    group.bench_function("piecewise_ramp", |b| {
        b.iter(|| optimal_effort(black_box(0.9), black_box(1.0), &ramp))
    });
    group.finish();
}

fn bench_dynamics(c: &mut Criterion) {
    let spec = TransferSpec::power(0.5, 1.0).unwrap();
    let state = mixed_population(64);
    c.bench_function("step_generation_64", |b| {
        b.iter_batched(
            || state.clone(),
            |s| step_generation(&s, &spec),
            BatchSize::SmallInput,
        )
    });
    let small = mixed_population(8);
    c.bench_function("find_equilibrium_8", |b| {
        b.iter_batched(
            || small.clone(),
            |s| find_equilibrium(&s, &spec, &EquilibriumOptions::default()),
            BatchSize::SmallInput,
        )
    });
}

fn bench_curves_and_inference(c: &mut Criterion) {
    let step = step_spec();
    c.bench_function("effort_curve_step_200", |b| {
        b.iter(|| effort_curve(1.0, &step, black_box(0.3), black_box(2.0), 200))
    });
    let smooth = tanh_spec();
    c.bench_function("round_trip_tanh_200", |b| {
        b.iter(|| round_trip_error(&smooth, 1.0, (0.5, 2.0), 200))
    });
}

criterion_group!(
    benches,
    bench_optimal_effort,
    bench_dynamics,
    bench_curves_and_inference
);
criterion_main!(benches);
