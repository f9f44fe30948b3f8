//! Sequential versus rayon execution of the data-parallel kernels:
//! independent trials and the C×K partition fits of the distributed learner.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use unlearn::distributed::dist_learn;
use unlearn::exec::Execution;
use unlearn::harness::{run_experiment, ChainConfig, ExperimentConfig};
use unlearn::rng::Seeds;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("trials");
    g.sample_size(10);
    for (name, execution) in MODES {
        let cfg = ExperimentConfig { n: 500, d: 5, trials: 8, update_length: 50, measure_gap: false, execution, ..Default::default() };
        let p = cfg.prepare().unwrap();
        g.bench_function(BenchmarkId::new("strong_secret_chain", name), |b| b.iter(|| run_experiment(&p).unwrap()));
    }
    g.finish();
}

fn partitions(c: &mut Criterion) {
    let mut g = c.benchmark_group("partitions");
    g.sample_size(10);
    for (name, execution) in MODES {
        let cfg = ExperimentConfig { n: 400, d: 10, delta: 1e-4, mode: "distributed".parse().unwrap(), execution, ..Default::default() };
        let p = cfg.prepare().unwrap();
        let ChainConfig::Distributed(dc) = &p.chain else { unreachable!() };
        let data = p.trial(0).unwrap().dataset;
        g.bench_function(BenchmarkId::new("dist_learn", name), |b| b.iter(|| dist_learn(data.clone(), dc, &Seeds::new(1)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, trials, partitions);
criterion_main!(benches);
