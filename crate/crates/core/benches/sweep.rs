use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use silofair::{
    client_summarize, run_sweep, sample_beta, server_audit_with, Dataset, Execution, GridSpec, Power, Regime,
    SiloMessage, SweepSpec,
};

fn federation(d: usize, groups: usize, k: usize) -> Vec<SiloMessage> {
    let grid = GridSpec::new(k).unwrap();
    (0..d)
        .map(|j| {
            let data: BTreeMap<String, Vec<f64>> = (0..groups)
                .map(|s| {
                    let seed = (j * groups + s) as u64;
                    (format!("g{s}"), sample_beta(2.0 + s as f64, 3.0, 2000, seed).unwrap())
                })
                .collect();
            client_summarize(format!("silo{j}"), &data, grid).unwrap()
        })
        .collect()
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_audit(c: &mut Criterion) {
    let msgs = federation(32, 8, 512);
    let mut group = c.benchmark_group("server_audit");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, "d32-g8-k512"), &exec, |b, &exec| {
            b.iter(|| server_audit_with(black_box(&msgs), Power::Two, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let ds = Dataset::synthetic_deciles(1).unwrap();
    let spec = SweepSpec {
        ks: vec![10, 40, 160],
        ds: vec![2, 8],
        regimes: Regime::ALL.to_vec(),
        rho: 0.8,
        replications: 8,
        tau: 0.01,
        base_seed: 3,
        reference_k: 2001,
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, "deciles"), &exec, |b, &exec| {
            b.iter(|| run_sweep(black_box(&ds), &spec, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_audit, bench_sweep);
criterion_main!(benches);
