//! Three estimators of one conditional law checked against each other: the
//! grid filter, a bootstrap particle filter, and Kalman–Bucy when the drift
//! is linear.

use nalgebra::{DMatrix, DVector};

use super::cosim::{stream, CoSimulation};
use super::report::{Artifacts, Assertion, RunOutput, RunReport, SeedManifest};
use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::filter::{
    coarsen, conditional_variance, kalman_bucy_oracle, observe_increment,
    scalar_riccati_fixed_point, GridFilter, ParticleFilter,
};
use crate::numerics::{expectation_position, CellSampler, Grid, SeededRng};
use crate::schrodinger::polar_amplitude;
use crate::transport::DriftField;

/// `dP/dt = −2P + 1 − P²` (`a = −1`, `g = 1`, `q = 1`) is stationary at
/// `P = √2 − 1`, the positive root of `P² + 2P − 1 = 0`.
pub const RICCATI_FIXED_POINT: f64 = std::f64::consts::SQRT_2 - 1.0;
pub const RICCATI_TOLERANCE: f64 = 1e-6;
pub const PARTICLE_GRID_L1: f64 = 0.05;
/// Relative tolerance on the Kalman–Bucy variance; the mean is held to this
/// fraction of `max(|m|, √P)`.
pub const KALMAN_BUCY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub particles: usize,
    /// Coarse bins on which particle and grid densities are compared.
    pub bins: usize,
    /// Drift coefficient of the linear case.
    pub linear_a: f64,
    /// Integration horizon for the Riccati fixed point.
    pub riccati_horizon: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            particles: 10_000,
            bins: 32,
            linear_a: -1.0,
            riccati_horizon: 20.0,
        }
    }
}

/// `bohmian` drives the particle/grid comparison with the drift of its own
/// co-simulated ψ path; `linear` is observed through a hidden `dX = aX dt`.
pub fn run_oracle_triangle(
    bohmian: &ScenarioSpec,
    linear: &ScenarioSpec,
    options: &OracleOptions,
) -> Result<RunOutput> {
    bohmian.validate()?;
    linear.validate()?;
    let seeds = SeedManifest::new(bohmian.seed)
        .stream("bohmian_truth", "substream(master, 0, 0)")
        .stream("bohmian_observation", "substream(master, 0, 1)")
        .stream("particle_filter", "substream(master, 0, 3)")
        .stream(
            "linear_case",
            &format!(
                "substream({}, 0, 0|1|3) for truth, observation, particles",
                linear.seed
            ),
        );
    let mut report = RunReport::new(
        "oracle_triangle",
        &format!("{}+{}", bohmian.name, linear.name),
        format!("{}+{}", bohmian.hash(), linear.hash()),
        seeds,
    );
    particle_vs_grid(bohmian, options, &mut report)?;
    kalman_bucy_vs_grid(linear, options, &mut report)?;
    riccati(options, &mut report)?;
    Ok(RunOutput {
        report,
        artifacts: Artifacts::default(),
    })
}

fn particle_vs_grid(
    scenario: &ScenarioSpec,
    options: &OracleOptions,
    report: &mut RunReport,
) -> Result<()> {
    let propagator = scenario.propagator()?;
    let psi0 = scenario.psi0()?;
    let born = polar_amplitude(&psi0)?;
    let coupling = scenario.coupling();
    let grid = scenario.grid;
    let bins = Grid {
        n: options.bins,
        ..grid
    };
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
    let mut filter = GridFilter::new(born.clone(), coupling.clone(), scenario.dt)?;
    let mut pf = ParticleFilter::new(
        &born,
        options.particles,
        coupling,
        SeededRng::substream(scenario.seed, 0, stream::PARTICLE_FILTER),
    )?;
    let outputs = scenario.output_steps();
    let mut ts = Vec::new();
    let mut l1s = Vec::new();
    let mut compare = |t: f64, filter: &GridFilter, pf: &ParticleFilter| -> Result<()> {
        ts.push(t);
        l1s.push(pf.density(&bins).l1_distance(&coarsen(&filter.rho, &bins)?));
        Ok(())
    };
    if outputs.first() == Some(&0) {
        compare(0.0, &filter, &pf)?;
    }
    for step in 1..=scenario.steps() {
        let s = sim.step()?;
        filter.step(&s.drift, &s.dy)?;
        pf.step(&s.drift, &s.dy, scenario.dt)?;
        if outputs.binary_search(&step).is_ok() {
            compare(sim.time(), &filter, &pf)?;
        }
    }
    let worst = l1s.iter().cloned().fold(0.0, f64::max);
    report.scalar("particle_grid_max_l1", worst);
    report.scalar("particle_filter_resamples", pf.resamples as f64);
    report.series("particle_grid_l1", ts, l1s);
    report.check(Assertion::at_most(
        format!(
            "max_t L1(particle, grid) on {} bins, N = {}",
            options.bins, options.particles
        ),
        worst,
        PARTICLE_GRID_L1,
    ));
    Ok(())
}

fn kalman_bucy_vs_grid(
    scenario: &ScenarioSpec,
    options: &OracleOptions,
    report: &mut RunReport,
) -> Result<()> {
    if scenario.grid.dim != 1 {
        return Err(Error::InvalidParameter(
            "the Kalman–Bucy comparison is scalar".into(),
        ));
    }
    let grid = scenario.grid;
    let dt = scenario.dt;
    let a = options.linear_a;
    let coupling = scenario.coupling();
    let prior = polar_amplitude(&scenario.psi0()?)?;
    let prior_mean = expectation_position(&prior)?;
    let prior_var = conditional_variance(&prior, &prior_mean);
    let drift = DriftField::linear(grid, &[vec![a]])?;

    let mut x = CellSampler::new(&prior)?.sample(&mut SeededRng::substream(
        scenario.seed,
        0,
        stream::INITIAL_POSITION,
    ));
    let mut noise = SeededRng::substream(scenario.seed, 0, stream::OBSERVATION_NOISE);
    let mut filter = GridFilter::new(prior.clone(), coupling.clone(), dt)?;
    let mut pf = ParticleFilter::new(
        &prior,
        options.particles,
        coupling.clone(),
        SeededRng::substream(scenario.seed, 0, stream::PARTICLE_FILTER),
    )?;
    let steps = scenario.steps();
    let mut dys = Vec::with_capacity(steps);
    let mut grid_moments = Vec::with_capacity(steps);
    let mut pf_moments = Vec::with_capacity(steps);
    for _ in 0..steps {
        let dy = observe_increment(&x, &coupling, dt, &mut noise)?;
        x[0] *= (a * dt).exp();
        filter.step(&drift, &dy)?;
        pf.step(&drift, &dy, dt)?;
        let m = expectation_position(&filter.rho)?;
        grid_moments.push((m[0], conditional_variance(&filter.rho, &m)[0]));
        pf_moments.push(pf.mean()[0]);
        dys.push(dy);
    }
    let scalar = |v: f64| DMatrix::from_element(1, 1, v);
    let kb = kalman_bucy_oracle(
        &scalar(a),
        &coupling,
        &scalar(0.0),
        &DVector::from_element(1, prior_mean[0]),
        &scalar(prior_var[0]),
        &dys,
        dt,
    )?;
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let (mut ts, mut mean_err, mut var_err) = (Vec::new(), Vec::new(), Vec::new());
    for (k, ((m, v), est)) in grid_moments.iter().zip(&kb[1..]).enumerate() {
        let (km, kv) = (est.mean[0], est.cov[(0, 0)]);
        let em = (m - km).abs() / km.abs().max(kv.sqrt());
        let ev = (v / kv - 1.0).abs();
        worst_mean = worst_mean.max(em);
        worst_var = worst_var.max(ev);
        if (k + 1) % 100 == 0 {
            ts.push(est.t);
            mean_err.push(em);
            var_err.push(ev);
        }
    }
    let last = kb.last().expect("at least the prior");
    let pf_gap = (pf_moments.last().copied().unwrap_or(prior_mean[0]) - last.mean[0]).abs();
    report.scalar("kalman_bucy_final_mean", last.mean[0]);
    report.scalar("kalman_bucy_final_var", last.cov[(0, 0)]);
    report.series("kalman_bucy_mean_error", ts.clone(), mean_err);
    report.series("kalman_bucy_var_error", ts, var_err);
    report.check(Assertion::at_most(
        "max_t |m_grid - m_KB| / max(|m_KB|, sqrt(P_KB))",
        worst_mean,
        KALMAN_BUCY_TOLERANCE,
    ));
    report.check(Assertion::at_most(
        "max_t |P_grid / P_KB - 1|",
        worst_var,
        KALMAN_BUCY_TOLERANCE,
    ));
    report.check(Assertion::at_most(
        "|m_particle - m_KB| at the horizon",
        pf_gap,
        3.0 * (last.cov[(0, 0)] / options.particles as f64).sqrt(),
    ));
    Ok(())
}

fn riccati(options: &OracleOptions, report: &mut RunReport) -> Result<()> {
    let dt = 1e-3;
    let steps = (options.riccati_horizon / dt).round() as usize;
    let scalar = |v: f64| DMatrix::from_element(1, 1, v);
    let dy = vec![vec![0.0]; steps];
    let kb = kalman_bucy_oracle(
        &scalar(-1.0),
        &[1.0],
        &scalar(1.0),
        &DVector::from_element(1, 0.0),
        &scalar(1.0),
        &dy,
        dt,
    )?;
    let p_end = kb.last().expect("nonempty").cov[(0, 0)];
    report.scalar("riccati_p_end", p_end);
    report.check(Assertion::at_most(
        "|P(T) - (sqrt(2) - 1)|",
        (p_end - RICCATI_FIXED_POINT).abs(),
        RICCATI_TOLERANCE,
    ));
    report.check(Assertion::at_most(
        "|closed-form root - (sqrt(2) - 1)|",
        (scalar_riccati_fixed_point(-1.0, 1.0, 1.0) - RICCATI_FIXED_POINT).abs(),
        1e-15,
    ));
    Ok(())
}
