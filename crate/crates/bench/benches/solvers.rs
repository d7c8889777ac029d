use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trussprox::{apgm_solve, IncrementProblem, SolverConfig, StepMode};
use trussprox_bench::vault_case;

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels");
    for n in [10, 30, 60] {
        let (model, state, law, f) = vault_case(n);
        let b = model.compatibility();
        let v = vec![1e-3; model.num_dofs()];
        let mut y = vec![0.0; model.num_members()];
        group.bench_with_input(BenchmarkId::new("b_mul", n), &n, |bench, _| {
            bench.iter(|| b.mul_vec(black_box(&v), &mut y))
        });
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let x = prob.zero_point();
        group.bench_with_input(BenchmarkId::new("gradient", n), &n, |bench, _| {
            bench.iter(|| prob.gradient(black_box(&x)))
        });
    }
    group.finish();
}

fn step_sizes(c: &mut Criterion) {
    let (model, state, law, f) = vault_case(10);
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
    let mut group = c.benchmark_group("step_size");
    group.sample_size(10);
    group.bench_function("power_iteration", |b| {
        b.iter(|| prob.lipschitz_exact().unwrap())
    });
    group.bench_function("gershgorin", |b| b.iter(|| prob.lipschitz_gershgorin()));
    group.finish();
}

fn increments(c: &mut Criterion) {
    let (model, state, law, f) = vault_case(10);
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
    let alpha = 1.0 / prob.lipschitz_exact().unwrap();
    let mut group = c.benchmark_group("increment");
    group.sample_size(10);
    for (name, cfg) in [
        ("apgm", SolverConfig::apgm()),
        (
            "apgm_no_restart",
            SolverConfig {
                restart: false,
                ..SolverConfig::apgm()
            },
        ),
    ] {
        let cfg = cfg.with_step(StepMode::Fixed(alpha));
        group.bench_function(name, |b| b.iter(|| apgm_solve(&prob, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernels, step_sizes, increments);
criterion_main!(benches);
