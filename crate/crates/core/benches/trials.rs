use byzsw::harness::{preset, run_fr, run_vr, Experiment};
use byzsw::par::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn experiment(name: &str) -> Experiment {
    preset(name).and_then(|f| f.build()).expect("preset builds")
}

fn vr_trials(c: &mut Criterion) {
    let exp = experiment("pair");
    let mut group = c.benchmark_group("vr_trials");
    group.sample_size(10);
    for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(label, 16), &exec, |b, &exec| {
            b.iter(|| run_vr(&exp, 16, 1, exec).expect("run"))
        });
    }
    group.finish();
}

fn fr_trials(c: &mut Criterion) {
    let exp = experiment("three-sensor-converse");
    let mut group = c.benchmark_group("fr_trials");
    group.sample_size(10);
    for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(label, 64), &exec, |b, &exec| {
            b.iter(|| run_fr(&exp, 64, 1, exec).expect("run"))
        });
    }
    group.finish();
}

criterion_group!(benches, vr_trials, fr_trials);
criterion_main!(benches);
