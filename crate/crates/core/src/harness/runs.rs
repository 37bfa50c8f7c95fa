//! Single-scenario runs behind the basic subcommands: unitary evolution,
//! Bohmian ensembles, one collapse path of either kind, and a stand-alone
//! filter.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::cosim::{stream, CoSimulation};
use super::report::{Artifacts, Assertion, RunOutput, RunReport, SeedManifest, Snapshot};
use super::scenario::ScenarioSpec;
use crate::bohm::{equivariance_distance, propagate_ensemble, Ensemble};
use crate::error::{Error, Result};
use crate::filter::{
    conditional_variance, kalman_bucy_oracle, observe_increment, DriftSpec, GridFilter,
    ObservationPath,
};
use crate::grw::{step_grw_continuous_with_norm, step_grw_discrete};
use crate::numerics::snapshot::IncrementPath;
use crate::numerics::{
    expectation_position, gaussian_increments, CellSampler, ComplexField, SeededRng,
};
use crate::schrodinger::{energy, polar_amplitude, Propagator};

/// Cumulative norm drift allowed over a unitary run.
pub const NORM_DRIFT: f64 = 1e-8;
/// Relative energy drift allowed over a unitary run.
pub const ENERGY_DRIFT: f64 = 1e-6;
/// Equivariance distance may grow to this multiple of its `t = 0` value.
pub const EQUIVARIANCE_FACTOR: f64 = 3.0;
/// Bound on `|‖ψ‖² − 1| / (dt·(1 + ½ΣGᵢ²Var_i))` before renormalization.
pub const PRE_NORM_DRIFT_FACTOR: f64 = 25.0;

/// Time series sampled every `stride` steps plus every output step.
struct Sampler {
    stride: usize,
    outputs: Vec<usize>,
}

impl Sampler {
    fn new(scenario: &ScenarioSpec) -> Self {
        Self {
            stride: (scenario.steps() / 200).max(1),
            outputs: scenario.output_steps(),
        }
    }

    fn series(&self, step: usize) -> bool {
        step.is_multiple_of(self.stride) || self.output(step)
    }

    fn output(&self, step: usize) -> bool {
        self.outputs.binary_search(&step).is_ok()
    }
}

fn moments(psi: &ComplexField) -> Result<(f64, f64)> {
    let rho = polar_amplitude(psi)?;
    let m = expectation_position(&rho)?;
    Ok((m[0], conditional_variance(&rho, &m)[0]))
}

/// Unitary evolution only; collapse settings are ignored.
pub fn run_schrodinger(scenario: &ScenarioSpec) -> Result<RunOutput> {
    scenario.validate()?;
    let propagator = scenario.propagator()?;
    let mut psi = scenario.psi0()?;
    let mut report = RunReport::new(
        "schrodinger",
        &scenario.name,
        scenario.hash(),
        SeedManifest::new(scenario.seed),
    );
    let mut artifacts = Artifacts::default();
    let sampler = Sampler::new(scenario);
    let e0 = energy(&psi, &scenario.potential, &scenario.masses)?;
    let (mut ts, mut norms, mut energies, mut means, mut vars) =
        (vec![], vec![], vec![], vec![], vec![]);
    let mut worst_norm: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    let scale = e0.abs().max(1e-12);
    for step in 0..=scenario.steps() {
        if step > 0 {
            propagator.apply(&mut psi);
            psi.check_finite()?;
        }
        if sampler.series(step) || step == scenario.steps() {
            let t = step as f64 * scenario.dt;
            let norm = psi.norm_sqr().sqrt();
            let e = energy(&psi, &scenario.potential, &scenario.masses)?;
            let (m, v) = moments(&psi)?;
            worst_norm = worst_norm.max((norm - 1.0).abs());
            worst_energy = worst_energy.max((e - e0).abs() / scale);
            ts.push(t);
            norms.push(norm);
            energies.push(e);
            means.push(m);
            vars.push(v);
            if sampler.output(step) {
                artifacts.snapshots.push((
                    format!("psi_t{t:.4}"),
                    Snapshot::Complex {
                        t,
                        field: psi.clone(),
                    },
                ));
            }
        }
    }
    report.scalar("energy_initial", e0);
    report.scalar("final_variance_x", *vars.last().unwrap());
    report.series("norm", ts.clone(), norms);
    report.series("energy", ts.clone(), energies);
    report.series("mean_x", ts.clone(), means);
    report.series("var_x", ts, vars);
    report.check(Assertion::at_most(
        "max_t |norm - 1|",
        worst_norm,
        NORM_DRIFT,
    ));
    report.check(Assertion::at_most(
        "max_t |<H> - <H>_0| / |<H>_0|",
        worst_energy,
        ENERGY_DRIFT,
    ));
    Ok(RunOutput { report, artifacts })
}

/// Bohmian ensemble of `replicas` particles drawn from `|ψ₀|²` and moved
/// along the unitary ψ path.
pub fn run_bohm(scenario: &ScenarioSpec) -> Result<RunOutput> {
    scenario.validate()?;
    let psi0 = scenario.psi0()?;
    let half = Propagator::new(
        scenario.grid,
        &scenario.potential,
        &scenario.masses,
        0.5 * scenario.dt,
        scenario.kinetic,
    )?;
    let ensemble =
        Ensemble::from_density(&polar_amplitude(&psi0)?, scenario.replicas, scenario.seed)?;
    let mut times = scenario.output_times.clone();
    if !times.contains(&0.0) {
        times.insert(0, 0.0);
    }
    let run = propagate_ensemble(
        &ensemble,
        &psi0,
        &half,
        &scenario.masses,
        scenario.horizon,
        &times,
    )?;
    let distances: Vec<f64> = run
        .trajectories
        .positions
        .iter()
        .zip(&run.densities)
        .map(|(x, rho)| equivariance_distance(x, rho))
        .collect();
    let initial = distances[0];
    let worst = distances.iter().cloned().fold(0.0, f64::max);
    let start = &run.trajectories.positions[0];
    let crossings = (0..ensemble.len())
        .filter(|&r| {
            run.trajectories
                .positions
                .iter()
                .any(|snap| snap[r][0].signum() != start[r][0].signum())
        })
        .count();

    let seeds =
        SeedManifest::new(scenario.seed).stream("initial_positions", "split(master, replica)");
    let mut report = RunReport::new("bohm", &scenario.name, scenario.hash(), seeds);
    report.scalar("initial_distance", initial);
    report.scalar("max_distance", worst);
    report.scalar("axis_crossings", crossings as f64);
    report.series(
        "equivariance_distance",
        run.trajectories.times.clone(),
        distances,
    );
    report.check(Assertion::at_most(
        "max_t L1(histogram, |psi_t|^2) / its t = 0 value",
        worst / initial,
        EQUIVARIANCE_FACTOR,
    ));
    let mut artifacts = Artifacts::default();
    for (t, rho) in run.trajectories.times.iter().zip(run.densities) {
        artifacts.snapshots.push((
            format!("born_t{t:.4}"),
            Snapshot::Density { t: *t, field: rho },
        ));
    }
    artifacts.trajectories = Some(run.trajectories);
    Ok(RunOutput { report, artifacts })
}

/// One discrete-collapse path (replica 0).
pub fn run_grw_discrete(scenario: &ScenarioSpec) -> Result<RunOutput> {
    scenario.validate()?;
    let propagator = scenario.propagator()?;
    let params = scenario.grw.discrete()?;
    let rates = params.rates(&scenario.masses);
    let mut psi = scenario.psi0()?;
    let mut rng = SeededRng::substream(scenario.seed, 0, stream::HITS);
    let seeds = SeedManifest::new(scenario.seed).stream("hits", "substream(master, 0, 2)");
    let mut report = RunReport::new("grw_discrete", &scenario.name, scenario.hash(), seeds);
    let mut artifacts = Artifacts::default();
    let sampler = Sampler::new(scenario);
    let (mut ts, mut means, mut vars) = (vec![], vec![], vec![]);
    let mut worst_norm: f64 = 0.0;
    let mut hits = 0usize;
    for step in 0..=scenario.steps() {
        let t = step as f64 * scenario.dt;
        if step > 0 {
            let (next, events) = step_grw_discrete(
                &psi,
                &propagator,
                &rates,
                params.sigma,
                t - scenario.dt,
                &mut rng,
            )?;
            psi = next;
            hits += events.len();
            for e in events {
                artifacts.events.push(json!({"t": e.t, "i": e.i, "z": e.z}));
            }
            worst_norm = worst_norm.max((psi.norm_sqr().sqrt() - 1.0).abs());
        }
        if sampler.series(step) {
            let (m, v) = moments(&psi)?;
            ts.push(t);
            means.push(m);
            vars.push(v);
        }
        if sampler.output(step) {
            artifacts.snapshots.push((
                format!("psi_t{t:.4}"),
                Snapshot::Complex {
                    t,
                    field: psi.clone(),
                },
            ));
        }
    }
    report.scalar("hits", hits as f64);
    report.scalar(
        "expected_hits",
        rates.iter().sum::<f64>() * scenario.horizon,
    );
    report.series("mean_x", ts.clone(), means);
    report.series("var_x", ts, vars);
    report.check(Assertion::at_most("max_t |norm - 1|", worst_norm, 1e-12));
    Ok(RunOutput { report, artifacts })
}

/// One continuous-collapse path (replica 0) driven by fresh noise.
pub fn run_grw_continuous(scenario: &ScenarioSpec) -> Result<RunOutput> {
    scenario.validate()?;
    let propagator = scenario.propagator()?;
    let coupling = scenario.coupling();
    let dim = scenario.grid.dim;
    let dt = scenario.dt;
    let mut psi = scenario.psi0()?;
    let mut rng = SeededRng::substream(scenario.seed, 0, stream::COLLAPSE_NOISE);
    let seeds =
        SeedManifest::new(scenario.seed).stream("collapse_noise", "substream(master, 0, 4)");
    let mut report = RunReport::new("grw_continuous", &scenario.name, scenario.hash(), seeds);
    let mut artifacts = Artifacts::default();
    let sampler = Sampler::new(scenario);
    let mut path = IncrementPath::new(dt, dim);
    let (mut ts, mut means, mut vars, mut drifts) = (vec![], vec![], vec![], vec![]);
    let mut worst_norm: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let (m0, v0) = moments(&psi)?;
    let mut var = v0;
    ts.push(0.0);
    means.push(m0);
    vars.push(v0);
    drifts.push(0.0);
    if sampler.output(0) {
        artifacts.snapshots.push((
            "psi_t0.0000".into(),
            Snapshot::Complex {
                t: 0.0,
                field: psi.clone(),
            },
        ));
    }
    let g2: f64 = coupling.iter().map(|g| g * g).sum();
    for step in 1..=scenario.steps() {
        let dw = gaussian_increments(&mut rng, dt, dim)?;
        let out = step_grw_continuous_with_norm(&psi, &propagator, &coupling, &dw)?;
        psi = out.psi;
        path.push(dw);
        let drift = (out.norm_sqr_before - 1.0).abs();
        worst_norm = worst_norm.max((psi.norm_sqr() - 1.0).abs());
        worst_drift = worst_drift.max(drift / (dt * (1.0 + 0.5 * g2 * var)));
        let t = step as f64 * dt;
        if sampler.series(step) {
            let (m, v) = moments(&psi)?;
            var = v;
            ts.push(t);
            means.push(m);
            vars.push(v);
            drifts.push(drift);
        }
        if sampler.output(step) {
            artifacts.snapshots.push((
                format!("psi_t{t:.4}"),
                Snapshot::Complex {
                    t,
                    field: psi.clone(),
                },
            ));
        }
    }
    report.series("mean_x", ts.clone(), means);
    report.series("var_x", ts.clone(), vars);
    report.series("pre_renormalization_drift", ts, drifts);
    report.scalar("max_scaled_pre_renormalization_drift", worst_drift);
    report.check(Assertion::at_most(
        "max_t |norm^2 - 1| after renormalization",
        worst_norm,
        1e-12,
    ));
    report.check(Assertion::at_most(
        "max_t |norm^2 - 1| before renormalization / (dt (1 + G^2 Var / 2))",
        worst_drift,
        PRE_NORM_DRIFT_FACTOR,
    ));
    artifacts.paths.push(("dW".into(), path));
    Ok(RunOutput { report, artifacts })
}

/// Grid filter on a simulated observation path. With a Bohmian drift the
/// hidden particle and ψ come from the co-simulation and the filter density
/// is compared with `|ψ|²`; otherwise the particle follows `drift` from a
/// draw of the prior and, for a scalar linear drift, the filter is compared
/// with Kalman–Bucy.
pub fn run_filter(scenario: &ScenarioSpec, drift: &DriftSpec) -> Result<RunOutput> {
    scenario.validate()?;
    let grid = scenario.grid;
    let dt = scenario.dt;
    let coupling = scenario.coupling();
    let psi0 = scenario.psi0()?;
    let prior = polar_amplitude(&psi0)?;
    let mut filter = GridFilter::new(prior.clone(), coupling.clone(), dt)?;
    let seeds = SeedManifest::new(scenario.seed)
        .stream("initial_position", "substream(master, 0, 0)")
        .stream("observation_noise", "substream(master, 0, 1)");
    let mut report = RunReport::new("filter", &scenario.name, scenario.hash(), seeds);
    let mut artifacts = Artifacts::default();
    let sampler = Sampler::new(scenario);
    let mut dy_path = IncrementPath::new(dt, grid.dim);
    let (mut ts, mut means, mut l1s) = (vec![], vec![], vec![]);
    let mut record = |t: f64,
                      filter: &GridFilter,
                      psi: Option<&ComplexField>,
                      artifacts: &mut Artifacts|
     -> Result<()> {
        let m = expectation_position(&filter.rho)?;
        let l1 = match psi {
            Some(psi) => Some(polar_amplitude(psi)?.l1_distance(&filter.rho)),
            None => None,
        };
        artifacts.events.push(json!({
            "t": t,
            "mean": m,
            "var": conditional_variance(&filter.rho, &m),
            "l1_vs_psi2": l1,
        }));
        artifacts.snapshots.push((
            format!("rho_t{t:.4}"),
            Snapshot::Density {
                t,
                field: filter.rho.clone(),
            },
        ));
        ts.push(t);
        means.push(m[0]);
        l1s.push(l1.unwrap_or(f64::NAN));
        Ok(())
    };

    match drift {
        DriftSpec::Bohmian => {
            let propagator = scenario.propagator()?;
            let mut sim = CoSimulation::new(
                &propagator,
                &scenario.masses,
                coupling.clone(),
                psi0,
                None,
                scenario.seed,
                0,
                1,
            )?;
            if sampler.output(0) {
                record(0.0, &filter, Some(&sim.psi), &mut artifacts)?;
            }
            for step in 1..=scenario.steps() {
                let s = sim.step()?;
                filter.step(&s.drift, &s.dy)?;
                dy_path.push(s.dy);
                if sampler.output(step) {
                    record(sim.time(), &filter, Some(&sim.psi), &mut artifacts)?;
                }
            }
        }
        _ => {
            let field = drift.resolve(grid, None)?;
            let mut x = CellSampler::new(&prior)?.sample(&mut SeededRng::substream(
                scenario.seed,
                0,
                stream::INITIAL_POSITION,
            ));
            let mut noise = SeededRng::substream(scenario.seed, 0, stream::OBSERVATION_NOISE);
            let mut moments = Vec::new();
            if sampler.output(0) {
                record(0.0, &filter, None, &mut artifacts)?;
            }
            for step in 1..=scenario.steps() {
                let dy = observe_increment(&x, &coupling, dt, &mut noise)?;
                let f = field.at(&x);
                for (xk, fk) in x.iter_mut().zip(&f) {
                    *xk = grid.wrap(*xk + dt * fk);
                }
                filter.step(&field, &dy)?;
                let m = expectation_position(&filter.rho)?;
                moments.push((m[0], conditional_variance(&filter.rho, &m)[0]));
                dy_path.push(dy);
                if sampler.output(step) {
                    record(step as f64 * dt, &filter, None, &mut artifacts)?;
                }
            }
            if let (DriftSpec::Linear { a }, 1) = (drift, grid.dim) {
                let m0 = expectation_position(&prior)?;
                let v0 = conditional_variance(&prior, &m0);
                let kb = kalman_bucy_oracle(
                    &DMatrix::from_element(1, 1, a[0][0]),
                    &coupling,
                    &DMatrix::zeros(1, 1),
                    &DVector::from_column_slice(&m0),
                    &DMatrix::from_element(1, 1, v0[0]),
                    &dy_path.increments,
                    dt,
                )?;
                let (mut wm, mut wv): (f64, f64) = (0.0, 0.0);
                for ((m, v), est) in moments.iter().zip(&kb[1..]) {
                    let (km, kv) = (est.mean[0], est.cov[(0, 0)]);
                    wm = wm.max((m - km).abs() / km.abs().max(kv.sqrt()));
                    wv = wv.max((v / kv - 1.0).abs());
                }
                report.check(Assertion::at_most(
                    "max_t |m_grid - m_KB| / max(|m_KB|, sqrt(P_KB))",
                    wm,
                    0.01,
                ));
                report.check(Assertion::at_most("max_t |P_grid / P_KB - 1|", wv, 0.01));
            }
        }
    }
    let audit = filter.innovations.audit(&ObservationPath {
        coupling: coupling.clone(),
        path: dy_path.clone(),
    });
    report.check(Assertion::at_most(
        "max_k |dW_k - (dY_k - G <X>_k dt)|",
        audit,
        0.0,
    ));
    report.series("mean_x", ts.clone(), means);
    if matches!(drift, DriftSpec::Bohmian) {
        report.series("l1_rho_psi2", ts, l1s);
    }
    artifacts.paths.push(("dY".into(), dy_path));
    artifacts
        .paths
        .push(("dW".into(), filter.innovations.path.clone()));
    if filter.rho.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteField);
    }
    Ok(RunOutput { report, artifacts })
}
