use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shoal_bench::{fixture, school};
use shoal_core::dynamics::step;
use shoal_core::{builtin_config, run_trial, Builtin};
use std::hint::black_box;

fn field_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("field-solve");
    group.sample_size(10);
    for which in [Builtin::Config2, Builtin::Config3] {
        let cfg = builtin_config(which);
        group.bench_function(which.name(), |b| b.iter(|| cfg.solve_field().unwrap()));
    }
    group.finish();
}

fn single_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [2, 10, 50] {
        let (cfg, field) = fixture(Builtin::Config2, n);
        let state = school(&cfg, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| {
            b.iter(|| step(black_box(s), &cfg.arena, &field, &cfg.params, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn short_trial(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    group.sample_size(10);
    let (mut cfg, field) = fixture(Builtin::Config2, 10);
    cfg.horizon = 5.0;
    group.bench_function("config2-n10-t5", |b| b.iter(|| run_trial(black_box(&cfg), &field).unwrap()));
    group.finish();
}

criterion_group!(benches, field_solve, single_step, short_trial);
criterion_main!(benches);
