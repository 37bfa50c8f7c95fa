use num_complex::Complex64;
use rayon::prelude::*;

use super::*;
use crate::numerics::stats::mean;
use crate::numerics::{integrate, Grid, Spectral};
use crate::schrodinger::{bohmian_drift, step_unitary, PotentialSpec};

fn packet(grid: Grid, x0: f64, s: f64) -> ComplexField {
    let mut psi = ComplexField::from_fn(grid, |x| {
        Complex64::new(
            (-grid.min_image(x[0] - x0).powi(2) / (4.0 * s * s)).exp(),
            0.0,
        )
    });
    psi.normalize().unwrap();
    psi
}

/// `√p·φ(−d/2) + √(1−p)·φ(+d/2)` with narrow packets.
fn two_peak(grid: Grid, p: f64, d: f64, s: f64) -> ComplexField {
    let a = packet(grid, -0.5 * d, s);
    let b = packet(grid, 0.5 * d, s);
    let mut psi = ComplexField::from_values(
        grid,
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x * p.sqrt() + y * (1.0 - p).sqrt())
            .collect(),
    )
    .unwrap();
    psi.normalize().unwrap();
    psi
}

fn left_weight(psi: &ComplexField) -> f64 {
    let g = psi.grid;
    psi.values
        .iter()
        .enumerate()
        .filter(|(j, _)| g.coord(*j) < 0.0)
        .map(|(_, v)| v.norm_sqr())
        .sum::<f64>()
        * g.spacing()
}

#[test]
fn uniform_state_localizes_to_gaussian() {
    let g = Grid::centered(1, 256, 10.0).unwrap();
    let mut psi = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
    psi.normalize().unwrap();
    let sigma = 1.0;
    let out = localization_apply(&psi, 0, 0.0, sigma).unwrap();
    let rho = out.modulus_squared();
    let var: f64 = rho
        .values
        .iter()
        .enumerate()
        .map(|(j, p)| p * g.coord(j).powi(2))
        .sum::<f64>()
        * g.spacing();
    assert!((var - sigma * sigma / 2.0).abs() < 1e-9);
    assert!((integrate(&rho).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn narrow_packet_is_unchanged_by_wide_hit() {
    let g = Grid::centered(1, 512, 10.0).unwrap();
    let psi = packet(g, 1.0, 0.05);
    let out = localization_apply(&psi, 0, 1.0, 100.0).unwrap();
    assert!(out.l2_distance(&psi) < 1e-6);
}

#[test]
fn far_peak_is_suppressed() {
    let g = Grid::centered(1, 256, 8.0).unwrap();
    let d = 2.0;
    let sigma = 1.0;
    let psi = two_peak(g, 0.5, 2.0 * d, 0.2);
    let out = localization_apply(&psi, 0, d, sigma).unwrap();
    let (jm, jp) = (g.nearest_index(-d), g.nearest_index(d));
    let before = psi.values[jm].norm_sqr() / psi.values[jp].norm_sqr();
    let after = out.values[jm].norm_sqr() / out.values[jp].norm_sqr();
    let expected = (-(2.0 * d).powi(2) / (sigma * sigma)).exp();
    assert!((after / before / expected - 1.0).abs() < 1e-9);
}

#[test]
fn hit_outside_support_annihilates() {
    let g = Grid::centered(1, 256, 20.0).unwrap();
    let psi = packet(g, -10.0, 0.1);
    let err = localization_apply(&psi, 0, 10.0, 0.05).unwrap_err();
    assert!(matches!(err, Error::AnnihilatedState { .. }));
}

#[test]
fn empty_schedule_for_zero_rate() {
    let mut rng = SeededRng::new(0);
    assert!(sample_hit_schedule(&[0.0], 0.0, 10.0, &mut rng).is_empty());
    assert!(sample_hit_schedule(&[1.0], 0.0, 0.0, &mut rng).is_empty());
}

#[test]
fn poisson_counts() {
    let counts: Vec<f64> = (0..1000u64)
        .into_par_iter()
        .map(|r| sample_hit_schedule(&[1.0], 0.0, 1e4, &mut SeededRng::split(5, r)).len() as f64)
        .collect();
    let m = mean(&counts);
    assert!((m - 1e4).abs() < 3.0 * 100.0 / (1000f64).sqrt(), "{m}");
}

#[test]
fn heavier_particle_is_hit_proportionally_more() {
    let params = GrwDiscreteParams::new(1.0, 1.0).unwrap();
    let masses = MassSpec::new(vec![1.0, 2.0]).unwrap();
    let rates = params.rates(&masses);
    assert_eq!(rates, vec![1.0, 2.0]);
    let hits = sample_hit_schedule(&rates, 0.0, 5e4, &mut SeededRng::new(7));
    let n0 = hits.iter().filter(|h| h.1 == 0).count() as f64;
    let n1 = hits.len() as f64 - n0;
    assert!((n1 / n0 / 2.0 - 1.0).abs() < 0.05);
    assert!(hits.windows(2).all(|w| w[0].0 <= w[1].0));
}

#[test]
fn point_state_gives_gaussian_centers() {
    let g = Grid::centered(1, 1024, 10.0).unwrap();
    let c = g.coord(600);
    let mut psi = ComplexField::zeros(g);
    psi.values[600] = Complex64::new(1.0, 0.0);
    psi.normalize().unwrap();
    let sigma = 0.8;
    let mut rng = SeededRng::new(9);
    let n = 4000;
    let z: Vec<f64> = (0..n)
        .map(|_| sample_hit_center(&psi, 0, sigma, &mut rng).unwrap())
        .collect();
    let m = mean(&z);
    assert!(
        (m - c).abs() < 3.0 * sigma / (2.0 * n as f64).sqrt(),
        "{m} {c}"
    );
    let var = crate::numerics::stats::variance(&z);
    assert!((var / (sigma * sigma / 2.0) - 1.0).abs() < 0.1, "{var}");
}

#[test]
fn hit_centers_follow_peak_masses() {
    let g = Grid::centered(1, 256, 12.0).unwrap();
    let n = 4000;
    for p in [0.5, 0.7] {
        let psi = two_peak(g, p, 8.0, 0.3);
        let mut rng = SeededRng::new(21);
        let left = (0..n)
            .filter(|_| sample_hit_center(&psi, 0, 0.5, &mut rng).unwrap() < 0.0)
            .count() as f64;
        let f = left / n as f64;
        assert!(
            (f - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(),
            "{p}: {f}"
        );
    }
}

#[test]
fn discrete_step_without_hits_is_unitary() {
    let g = Grid::centered(1, 128, 10.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let psi = packet(g, 0.0, 1.0);
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, 0.01, true).unwrap();
    let (out, events) =
        step_grw_discrete(&psi, &prop, &[0.0], 1.0, 0.0, &mut SeededRng::new(0)).unwrap();
    assert!(events.is_empty());
    assert_eq!(
        out,
        step_unitary(&psi, &PotentialSpec::Free, &m, 0.01).unwrap()
    );
}

#[test]
fn first_hit_picks_one_peak() {
    let g = Grid::centered(1, 256, 12.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let d = 2.0;
    let sigma = 1.0;
    let psi = two_peak(g, 0.5, 2.0 * d, 0.1);
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, 0.01, false).unwrap();
    let mut rng = SeededRng::new(4);
    let mut state = psi;
    let mut t = 0.0;
    loop {
        let (next, events) = step_grw_discrete(&state, &prop, &[1.0], sigma, t, &mut rng).unwrap();
        state = next;
        t += 0.01;
        if !events.is_empty() {
            break;
        }
    }
    let p = left_weight(&state);
    let odds = (p / (1.0 - p)).max((1.0 - p) / p);
    // centres drawn near a peak: odds ≈ exp((2d)²/σ²) up to the centre's spread
    assert!(
        odds.ln() > 0.5 * (2.0 * d).powi(2) / (sigma * sigma),
        "{odds}"
    );
}

#[test]
fn discrete_events_are_reproducible() {
    let g = Grid::centered(1, 128, 8.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, 0.005, true).unwrap();
    let run = || {
        let mut rng = SeededRng::new(77);
        let mut psi = two_peak(g, 0.5, 4.0, 0.5);
        let mut all = Vec::new();
        for s in 0..200 {
            let (next, ev) =
                step_grw_discrete(&psi, &prop, &[1.0], 1.0, s as f64 * 0.005, &mut rng).unwrap();
            psi = next;
            all.extend(ev);
        }
        all
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn oversized_discrete_step_is_rejected() {
    let g = Grid::centered(1, 64, 8.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, 0.5, true).unwrap();
    let psi = packet(g, 0.0, 1.0);
    assert!(step_grw_discrete(&psi, &prop, &[1.0], 1.0, 0.0, &mut SeededRng::new(0)).is_err());
}

#[test]
fn zero_coupling_is_the_unitary_step() {
    let g = Grid::centered(1, 512, 20.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let prop = Propagator::new(g, &PotentialSpec::Harmonic { k: 0.3 }, &m, 1e-3, true).unwrap();
    let psi = packet(g, 0.5, 1.0);
    let a = step_grw_continuous(&psi, &prop, &[0.0], &[0.3]).unwrap();
    let b = step_unitary(&psi, &PotentialSpec::Harmonic { k: 0.3 }, &m, 1e-3).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn continuous_step_keeps_unit_norm() {
    let g = Grid::centered(1, 256, 12.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let dt = 1e-3;
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, dt, true).unwrap();
    let mut psi = packet(g, 0.0, 1.0);
    let mut rng = SeededRng::new(12);
    for _ in 0..500 {
        let dw = crate::numerics::gaussian_increments(&mut rng, dt, 1).unwrap();
        let step = step_grw_continuous_with_norm(&psi, &prop, &[1.0], &dw).unwrap();
        assert!((step.psi.norm_sqr() - 1.0).abs() < 1e-12);
        // E[e^E] = 1: the drift of the norm is one noise kick, O(√dt)
        assert!((step.norm_sqr_before - 1.0).abs() < 10.0 * dt.sqrt());
        psi = step.psi;
    }
}

#[test]
fn continuous_two_peak_weight_is_a_martingale() {
    let g = Grid::centered(1, 128, 8.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let dt = 1e-3;
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, dt, false).unwrap();
    let psi0 = two_peak(g, 0.7, 4.0, 0.3);
    let paths = 2000;
    let finals: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeededRng::split(3, r);
            let mut psi = psi0.clone();
            for _ in 0..50 {
                let dw = crate::numerics::gaussian_increments(&mut rng, dt, 1).unwrap();
                psi = step_grw_continuous(&psi, &prop, &[1.0], &dw).unwrap();
            }
            left_weight(&psi)
        })
        .collect();
    let p0 = left_weight(&psi0);
    let sd = crate::numerics::stats::variance(&finals).sqrt() / (paths as f64).sqrt();
    assert!(
        (mean(&finals) - p0).abs() < 3.0 * sd,
        "{} {p0} {sd}",
        mean(&finals)
    );
}

#[test]
fn density_sde_without_coupling_tracks_schrodinger() {
    let g = Grid::centered(1, 256, 16.0).unwrap();
    let m = MassSpec::uniform(1, 1.0);
    let dt = 1e-3;
    let prop = Propagator::new(g, &PotentialSpec::Free, &m, dt, true).unwrap();
    let spectral = Spectral::new(g);
    let mut psi = ComplexField::from_fn(g, |x| Complex64::new(-x[0] * x[0] / 4.0, x[0]).exp());
    psi.normalize().unwrap();
    let mut rho = polar_amplitude(&psi).unwrap();
    for _ in 0..500 {
        let drift = bohmian_drift(&spectral, &psi, &m).unwrap();
        rho = step_density_sde(&rho, &drift, &[0.0], &[0.0], &[0.0], dt)
            .unwrap()
            .0;
        psi = prop.step(&psi).unwrap();
    }
    let l1 = rho.l1_distance(&polar_amplitude(&psi).unwrap());
    assert!(l1 < 5e-3, "{l1}");
    assert!((integrate(&rho).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn matter_density_examples() {
    let g1 = Grid::centered(1, 64, 6.0).unwrap();
    let psi = packet(g1, 0.3, 1.0);
    let md = matter_density(&psi, 0, &MassSpec::uniform(1, 1.0)).unwrap();
    assert_eq!(md.values, psi.modulus_squared().values);

    let g2 = Grid::centered(2, 64, 6.0).unwrap();
    let phi1 = |x: f64| (-(x - 1.0).powi(2) / 2.0).exp();
    let phi2 = |x: f64| (-(x + 0.5).powi(2) / 0.5).exp();
    let mut psi2 = ComplexField::from_fn(g2, |x| Complex64::new(phi1(x[0]) * phi2(x[1]), 0.0));
    psi2.normalize().unwrap();
    let masses = MassSpec::new(vec![2.0, 3.0]).unwrap();
    let mut p2 = ComplexField::from_fn(g1, |x| Complex64::new(phi2(x[0]), 0.0));
    p2.normalize().unwrap();
    let md2 = matter_density(&psi2, 1, &masses).unwrap();
    for (a, b) in md2.values.iter().zip(&p2.modulus_squared().values) {
        assert!((a - 3.0 * b).abs() < 1e-12);
    }
    let md1 = matter_density(&psi2, 0, &masses).unwrap();
    assert!((integrate(&md1).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn continuum_curve() {
    let p = GrwDiscreteParams::on_continuum_curve(100.0, 2.0).unwrap();
    assert!((2.0 * p.lambda / (p.sigma * p.sigma) - 4.0).abs() < 1e-12);
    let c =
        GrwContinuousParams::from_discrete(&p, &MassSpec::new(vec![1.0, 4.0]).unwrap()).unwrap();
    assert!((c.coupling[1] - 4.0).abs() < 1e-12);
    let phys = GrwDiscreteParams::physical(1e-7, 1e15).unwrap();
    assert!((phys.lambda - 0.01).abs() < 1e-15 && (phys.sigma - 1.0).abs() < 1e-15);
}
