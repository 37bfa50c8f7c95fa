use std::hint::black_box;

use bmgrw::filter::{GridFilter, ParticleFilter};
use bmgrw::grw::{localization_apply, step_grw_continuous};
use bmgrw::harness::presets;
use bmgrw::numerics::SeededRng;
use bmgrw::schrodinger::{bohmian_drift, polar_amplitude};
use criterion::{criterion_group, criterion_main, Criterion};

fn unitary(c: &mut Criterion) {
    for s in [presets::free_gaussian(), presets::two_slit()] {
        let propagator = s.propagator().unwrap();
        let psi = s.psi0().unwrap();
        c.bench_function(&format!("propagator_step/{}", s.name), |b| {
            b.iter(|| propagator.step(black_box(&psi)).unwrap())
        });
    }
}

fn collapse(c: &mut Criterion) {
    let s = presets::two_peak();
    let propagator = s.propagator().unwrap();
    let psi = s.psi0().unwrap();
    let coupling = s.coupling();
    c.bench_function("grw_continuous_step/two_peak", |b| {
        b.iter(|| step_grw_continuous(black_box(&psi), &propagator, &coupling, &[0.01]).unwrap())
    });
    c.bench_function("localization_apply/two_peak", |b| {
        b.iter(|| localization_apply(black_box(&psi), 0, 2.0, s.grw.sigma).unwrap())
    });
}

fn filters(c: &mut Criterion) {
    let s = presets::free_gaussian();
    let psi = s.psi0().unwrap();
    let rho = polar_amplitude(&psi).unwrap();
    let propagator = s.propagator().unwrap();
    let drift = bohmian_drift(propagator.spectral(), &psi, &s.masses).unwrap();
    let coupling = s.coupling();
    c.bench_function("grid_filter_step/free_gaussian", |b| {
        b.iter_batched(
            || GridFilter::new(rho.clone(), coupling.clone(), s.dt).unwrap(),
            |mut f| f.step(&drift, &[0.0]).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
    c.bench_function("particle_filter_step/10k", |b| {
        b.iter_batched(
            || ParticleFilter::new(&rho, 10_000, coupling.clone(), SeededRng::split(1, 0)).unwrap(),
            |mut f| f.step(&drift, &[0.0], s.dt).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, unitary, collapse, filters);
criterion_main!(benches);
