use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, Criterion};
use exflow::counterexample::{grad_energy_ualpha, ratio_scan, DEFAULT_ALPHAS};
use exflow::evolution::{Integrator, Scheme, SpectralState};
use exflow::functionals::{hardy_quotient_central, hypothesis_ratio_velocity};
use exflow::kernel_analysis::{kernel_forms, KernelProbe, ProbeFunction};
use exflow::steady_flows::{HamelFlow, SteadyFlowParams};
use exflow_bench::{flux_system, random_stream, sample_field};

fn counterexample(c: &mut Criterion) {
    c.bench_function("grad_energy_ualpha 0.1", |b| b.iter(|| grad_energy_ualpha(std::hint::black_box(0.1))));
    c.bench_function("ratio_scan default", |b| b.iter(|| ratio_scan(&DEFAULT_ALPHAS, 2.0 * PI)));
}

fn kernel(c: &mut Criterion) {
    let step = KernelProbe::new(ProbeFunction::Indicator { a: 0.0, b: 1.0 }, vec![32.0]).unwrap();
    c.bench_function("kernel forms step t=32", |b| b.iter(|| kernel_forms(&step, 32.0)));
    let recip = KernelProbe::new(ProbeFunction::PowerDecay { p: 1.0 }, vec![1e4]).unwrap();
    c.bench_function("kernel forms reciprocal t=1e4", |b| b.iter(|| kernel_forms(&recip, 1e4)));
}

fn quotients(c: &mut Criterion) {
    let v = sample_field(1);
    let u = HamelFlow(SteadyFlowParams::flux_carrier(PI));
    c.bench_function("hypothesis ratio", |b| b.iter(|| hypothesis_ratio_velocity(&v, &u)));
    c.bench_function("central hardy quotient", |b| b.iter(|| hardy_quotient_central(&v)));
}

fn galerkin(c: &mut Criterion) {
    let sys = flux_system(8.0, 4, 10);
    let xi = sys.project(&random_stream(7, 3.0)).unwrap();
    let state = SpectralState::new(xi);
    for scheme in [Scheme::ImplicitMidpoint, Scheme::ImexCnAb2] {
        let mut int = Integrator::new(&sys, 0.01, scheme).unwrap();
        c.bench_function(&format!("galerkin step {scheme}"), |b| b.iter(|| int.step(&state)));
    }
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    group.bench_function("flux system r8 m4 n10", |b| b.iter(|| flux_system(8.0, 4, 10)));
    group.finish();
}

criterion_group!(benches, counterexample, kernel, quotients, galerkin);
criterion_main!(benches);
