use std::hint::black_box;
use std::time::Duration;

use concord::model::{sample_covariance_with, smooth_gradient_with, PenaltyMatrix};
use concord::solvers::{solve, Problem, SolverConfig, Variant};
use concord::synth::{generate_sparse_concentration, lambda_grid, sample_gaussian, SynthSpec};
use concord::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels");
    for p in [100, 300] {
        let truth = generate_sparse_concentration(&SynthSpec::new(p, p * (p - 1) / 200, 1, 3)).unwrap();
        let y = sample_gaussian(&truth, p, 4).unwrap();
        let s = sample_covariance_with(&y, true, Exec::Sequential).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(format!("covariance/{name}"), p), &p, |b, _| {
                b.iter(|| sample_covariance_with(black_box(&y), true, exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("gradient/{name}"), p), &p, |b, _| {
                b.iter(|| smooth_gradient_with(black_box(&truth), &s, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    let p = 200;
    let truth = generate_sparse_concentration(&SynthSpec::new(p, p * (p - 1) / 200, 1, 5)).unwrap();
    let y = sample_gaussian(&truth, p, 6).unwrap();
    let s = sample_covariance_with(&y, true, Exec::Sequential).unwrap();
    let lambda = lambda_grid(&s, 3).unwrap()[1];
    let penalty = PenaltyMatrix::uniform(p, lambda).unwrap();
    let problem = Problem::from_data(&y, true).unwrap();
    for variant in [Variant::CcIsta0, Variant::CcFista1, Variant::Concord] {
        for (name, exec) in MODES {
            let config = SolverConfig::new(variant).with_exec(exec);
            group.bench_function(BenchmarkId::new(variant.name(), name), |b| {
                b.iter(|| solve(black_box(&problem), &penalty, &config).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, kernels, solves);
criterion_main!(benches);
