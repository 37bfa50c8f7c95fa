//! Quantum equilibrium under collapse: across replicas, `X_t` must look like
//! a draw from its own `ρ_t`, and the innovations must look Brownian.

use rayon::prelude::*;

use super::cosim::{density_cdf, CoSimulation};
use super::report::{Artifacts, Assertion, RunOutput, RunReport, SeedManifest};
use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::numerics::stats::{
    kolmogorov_pvalue, ks_critical_one_percent, ks_uniform, mean, pooled_lag1_autocorrelation,
};

/// Relative tolerance on the mean quadratic variation `Σ(dW)²` against `T`.
pub const QUADRATIC_VARIATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EquilibriumOptions {
    /// Hold `X` at its initial draw (negative control).
    pub freeze_particle: bool,
}

#[derive(Debug, Clone)]
struct Replica {
    /// `CDF_{ρ_t}(X_t)` at each output step.
    pit: Vec<f64>,
    /// Innovations, one series per component.
    dw: Vec<Vec<f64>>,
}

/// Assertion names start with `pit:` or `innovations:`.
pub fn run_equilibrium_under_collapse(
    scenario: &ScenarioSpec,
    options: EquilibriumOptions,
) -> Result<RunOutput> {
    scenario.validate()?;
    if scenario.grid.dim != 1 {
        return Err(Error::InvalidParameter(
            "the PIT check is implemented for D = 1".into(),
        ));
    }
    if !(scenario.grw.g > 0.0) {
        return Err(Error::InvalidParameter(
            "equilibrium under collapse needs g > 0".into(),
        ));
    }
    let propagator = scenario.propagator()?;
    let psi0 = scenario.psi0()?;
    let coupling = scenario.coupling();
    let outputs = scenario.output_steps();
    let steps = scenario.steps();
    let r = scenario.replicas;

    let replicas: Vec<Replica> = (0..r as u64)
        .into_par_iter()
        .map(|replica| {
            let mut sim = CoSimulation::new(
                &propagator,
                &scenario.masses,
                coupling.clone(),
                psi0.clone(),
                None,
                scenario.seed,
                replica,
                1,
            )?
            .freeze_particle(options.freeze_particle);
            let mut pit = Vec::with_capacity(outputs.len());
            let mut dw = vec![Vec::with_capacity(steps); scenario.grid.dim];
            let mut next = outputs.iter().peekable();
            if next.peek() == Some(&&0) {
                pit.push(density_cdf(&sim.rho, sim.x[0]));
                next.next();
            }
            for step in 1..=steps {
                let s = sim.step()?;
                for (series, w) in dw.iter_mut().zip(&s.dw) {
                    series.push(*w);
                }
                if next.peek() == Some(&&step) {
                    pit.push(density_cdf(&sim.rho, sim.x[0]));
                    next.next();
                }
            }
            Ok(Replica { pit, dw })
        })
        .collect::<Result<_>>()?;

    let seeds = SeedManifest::new(scenario.seed)
        .stream("initial_position", "substream(master, replica, 0)")
        .stream("observation_noise", "substream(master, replica, 1)");
    let experiment = if options.freeze_particle {
        "equilibrium_frozen_particle"
    } else {
        "equilibrium_under_collapse"
    };
    let mut report = RunReport::new(experiment, &scenario.name, scenario.hash(), seeds);
    let critical = ks_critical_one_percent(r);
    let times: Vec<f64> = outputs.iter().map(|&s| s as f64 * scenario.dt).collect();
    let mut ks_series = Vec::new();
    for (k, t) in times.iter().enumerate() {
        let u: Vec<f64> = replicas.iter().map(|rep| rep.pit[k]).collect();
        let d = ks_uniform(&u);
        ks_series.push(d);
        report.scalar(&format!("pit_pvalue_t{t}"), kolmogorov_pvalue(d, r as f64));
        report.check(Assertion::at_most(
            format!("pit: KS(u, Uniform) at t = {t}"),
            d,
            critical,
        ));
    }
    report.series("pit_ks", times, ks_series);

    let horizon = steps as f64 * scenario.dt;
    for axis in 0..scenario.grid.dim {
        let finals: Vec<f64> = replicas
            .iter()
            .map(|rep| rep.dw[axis].iter().sum())
            .collect();
        let qv: Vec<f64> = replicas
            .iter()
            .map(|rep| rep.dw[axis].iter().map(|w| w * w).sum())
            .collect();
        let series: Vec<&[f64]> = replicas.iter().map(|rep| rep.dw[axis].as_slice()).collect();
        let lag1 = pooled_lag1_autocorrelation(&series);
        let increments = (r * steps) as f64;
        let w_mean = mean(&finals);
        let qv_mean = mean(&qv);
        report.scalar(&format!("innovations_w_t_mean_{axis}"), w_mean);
        report.scalar(&format!("innovations_qv_mean_{axis}"), qv_mean);
        report.scalar(&format!("innovations_lag1_{axis}"), lag1);
        report.check(Assertion::at_most(
            format!("innovations: |mean W_T| (axis {axis})"),
            w_mean.abs(),
            3.0 * (horizon / r as f64).sqrt(),
        ));
        report.check(Assertion::within(
            format!("innovations: |mean quadratic variation - T| (axis {axis})"),
            qv_mean,
            horizon,
            QUADRATIC_VARIATION_TOLERANCE * horizon,
        ));
        report.check(Assertion::at_most(
            format!("innovations: |lag-1 autocorrelation| (axis {axis})"),
            lag1.abs(),
            3.0 / increments.sqrt(),
        ));
    }
    Ok(RunOutput {
        report,
        artifacts: Artifacts::default(),
    })
}

/// Assertions of `report` belonging to one check family (`pit` or
/// `innovations`).
pub fn family<'a>(
    report: &'a RunReport,
    prefix: &'a str,
) -> impl Iterator<Item = &'a Assertion> + 'a {
    report
        .assertions
        .iter()
        .filter(move |a| a.name.starts_with(prefix) && a.name[prefix.len()..].starts_with(':'))
}
