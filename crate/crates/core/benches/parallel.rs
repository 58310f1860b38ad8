//! Parallel against sequential execution for the two heaviest data-parallel
//! loops: Monte Carlo kernel estimation and simulator replicate fan-out.

use angbbm::kernel::{self, McConfig, Weight};
use angbbm::sim::{self, SimConfig};
use angbbm::{Execution, ModelParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn kernel_estimate(c: &mut Criterion) {
    let weight = Weight::new(1.0, 0.5).unwrap();
    let mut group = c.benchmark_group("estimate_gtilde");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = McConfig {
            n_samples: 4000,
            step: 0.05,
            seed: 1,
            exec,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| kernel::estimate_gtilde(4.0, 0.0, 16.0, 0.5, &weight, &cfg).unwrap())
        });
    }
    group.finish();
}

fn replicates(c: &mut Criterion) {
    let params = ModelParams::sin_pow(1.0).unwrap();
    let cfg = SimConfig::new(6.0, 2);
    let mut group = c.benchmark_group("run_replicates");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sim::run_replicates(&params, &cfg, 64, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_estimate, replicates);
criterion_main!(benches);
