use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stirap_core::decomp::{adapted_a_basis, decompose, lambda_pairs};
use stirap_core::oracle::{evolve, ProfileShape, StepControl, SweepProfile};
use stirap_core::passage::{integrate_transfer, Direction};
use stirap_core::{cesium_system, toy_model, LevelSystem, Manifold, OdeOptions, Polarization, DEFAULT_RANK_TOL};

fn cesium() -> LevelSystem {
    cesium_system(4, &Polarization::x(), &Polarization::z()).unwrap()
}

fn bench_decompose(c: &mut Criterion) {
    let sys = cesium();
    c.bench_function("decompose/cesium_f4_xz", |b| {
        b.iter(|| {
            let d = decompose(black_box(&sys), DEFAULT_RANK_TOL).unwrap();
            lambda_pairs(&d, &sys, Some(&adapted_a_basis(&d))).unwrap()
        })
    });
}

fn bench_transfer(c: &mut Criterion) {
    let opts = OdeOptions::default();
    for (name, sys) in [("toy", toy_model()), ("cesium_f4_xz", cesium())] {
        let d = decompose(&sys, DEFAULT_RANK_TOL).unwrap();
        let basis = lambda_pairs(&d, &sys, Some(&adapted_a_basis(&d))).unwrap();
        c.bench_function(&format!("integrate_transfer/{name}"), |b| {
            b.iter(|| integrate_transfer(black_box(&basis), Direction::AToB, &opts).unwrap())
        });
    }
}

fn bench_oracle(c: &mut Criterion) {
    let sys = toy_model();
    let d = decompose(&sys, DEFAULT_RANK_TOL).unwrap();
    let basis = lambda_pairs(&d, &sys, Some(&adapted_a_basis(&d))).unwrap();
    let psi = sys.embed(Manifold::A, &basis.a_state(0));
    let profile = SweepProfile::new(ProfileShape::SineSquared, 500.0, Direction::AToB).unwrap();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("toy_sweep_omega_t_500", |b| {
        b.iter(|| evolve(&sys, &profile, 1.0, black_box(&psi), &StepControl::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_decompose, bench_transfer, bench_oracle);
criterion_main!(benches);
