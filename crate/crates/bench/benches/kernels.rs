use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use coulomb_tmat::basis::{eta_hyp2f1, eta_sequence};
use coulomb_tmat::coeffs::{beta_seq, CoeffContext};
use coulomb_tmat::tmatrix::{t_element, tau_matrix};
use coulomb_tmat::{AssemblyRoute, DimensionlessState, MomentumVector, PhysicalSystem, Sigma, TOptions, TauRoute};

fn special_functions(c: &mut Criterion) {
    c.bench_function("eta_sequence n=40 l=5", |b| b.iter(|| eta_sequence(40, 5, black_box(0.7))));
    c.bench_function("eta_hyp2f1 n=40 l=5", |b| b.iter(|| eta_hyp2f1(40, 5, black_box(0.7)).unwrap()));
}

fn operators(c: &mut Criterion) {
    let st = DimensionlessState::from_reduced(Complex64::new(-2.0, 1.0), 1.0).unwrap();
    c.bench_function("beta_seq N=60", |b| {
        let ctx = CoeffContext::new(0, st, -1.0).unwrap();
        b.iter(|| beta_seq(black_box(60), &ctx).unwrap())
    });
    for route in [TauRoute::DirectSolve, TauRoute::FactorizedCgc] {
        c.bench_function(&format!("tau_matrix N=60 {route:?}"), |b| {
            b.iter(|| tau_matrix(0, black_box(&st), -1.0, 60, route).unwrap())
        });
    }
}

fn assembly(c: &mut Criterion) {
    let sys = PhysicalSystem::reduced(Sigma::Attractive);
    let k2 = MomentumVector::new(0.1, 0.1, 0.2);
    let k1 = MomentumVector::new(-0.6, 1.2, 0.5);
    let opts = TOptions::default();
    let mut g = c.benchmark_group("t_element");
    g.sample_size(10);
    for route in [AssemblyRoute::Expansion, AssemblyRoute::Separable] {
        g.bench_function(format!("{route:?}"), |b| {
            b.iter(|| t_element(&sys, Complex64::new(-1.0, 0.0), &k2, &k1, &opts, route).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, special_functions, operators, assembly);
criterion_main!(benches);
