use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fading_ilms::sim::{run_ensemble, run_stream, SimConfig, SimNetwork};
use fading_ilms::theory::{theoretical_metrics, transient_recursion};
use fading_ilms::PiConvention;
use ilms_bench::rayleigh_ring;
use nalgebra::DVector;

fn cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_cycle");
    for m in [1, 4, 16] {
        let p = rayleigh_ring(20, m, 1);
        let net = SimNetwork::<f64>::new(&p).unwrap();
        let mut rng = run_stream(1, 0);
        let w = DVector::zeros(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| net.run_cycle(&w, &mut rng));
        });
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let p = rayleigh_ring(20, 4, 2);
    let cfg = SimConfig { iterations: 200, runs: 16, tail: 50, master_seed: 1 };
    c.bench_function("run_ensemble N=20 M=4 T=200 R=16", |b| b.iter(|| run_ensemble(&p, &cfg).unwrap()));
}

fn theory(c: &mut Criterion) {
    let mut group = c.benchmark_group("theoretical_metrics");
    for n in [5, 20, 50] {
        let p = rayleigh_ring(n, 4, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| theoretical_metrics(&p, PiConvention::PerStep).unwrap());
        });
    }
    group.finish();
    let p = rayleigh_ring(20, 4, 4);
    c.bench_function("transient_recursion N=20 M=4 T=2000", |b| b.iter(|| transient_recursion(&p, 2000).unwrap()));
}

criterion_group!(benches, cycle, ensemble, theory);
criterion_main!(benches);
