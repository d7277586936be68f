use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use netauction::fuzz::{fuzz, FuzzConfig};
use netauction::mechanism::{hom_mechanism, MechanismKind, Variant};
use netauction::par::Execution;
use netauction::sim::{run_sweep, small_hom_instance, Axis, ExperimentConfig, Market, Topology};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        name: None,
        variant: Variant::Homogeneous,
        axis: Axis::Prob,
        points: vec![0.05, 0.15, 0.25],
        markets: vec![Market { suppliers: Some(40), tasks: Some(200) }],
        prob: None,
        topology: Topology::Random,
        repetitions: 8,
        mechanisms: vec![MechanismKind::NdVcg, MechanismKind::DVcg, MechanismKind::RanHm],
        seed: 1,
        timing: false,
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_sweep(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn exhaustive_fuzz(c: &mut Criterion) {
    let mech = hom_mechanism(MechanismKind::RanHm).unwrap();
    let inst = small_hom_instance(17);
    let mut group = c.benchmark_group("fuzz");
    group.sample_size(20);
    for (name, exec) in MODES {
        let cfg = FuzzConfig { execution: exec, ..FuzzConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| fuzz(&mech, &inst, cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, exhaustive_fuzz);
criterion_main!(benches);
