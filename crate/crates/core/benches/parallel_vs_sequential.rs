use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rigidflock::oned::{run_1d_ensemble, OneDConfig};
use rigidflock::scenario::builtin;
use rigidflock::sim::sweep;
use rigidflock::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn ensemble(c: &mut Criterion) {
    let cfg = OneDConfig {
        k_ef: 0.5,
        ell: 0.3,
        sigma_m: 3.0,
        rate_hz: 10.0,
        d: 0.0,
        sigma_init: 100.0,
        n_agents: 10_000,
        horizon: 500,
        seed: 1,
        record_agents: 0,
    };
    let mut g = c.benchmark_group("ensemble_1d_10k");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| run_1d_ensemble(black_box(&cfg), exec).unwrap()));
    }
    g.finish();
}

fn sweep_4d(c: &mut Criterion) {
    let mut s = builtin("three_agents").unwrap();
    s.horizon_steps = 500;
    let seeds: Vec<u64> = (0..8).collect();
    let mut g = c.benchmark_group("sweep_three_agents");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| sweep(black_box(&s), &[10.0, 50.0], &[0.5, 0.05], &seeds, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ensemble, sweep_4d);
criterion_main!(benches);
