//! Born-rule statistics of collapse from a two-packet superposition, under
//! the continuous model and under discrete hits.

use rayon::prelude::*;
use serde_json::json;

use super::cosim::stream;
use super::report::{Artifacts, Assertion, RunOutput, RunReport, SeedManifest};
use super::scenario::{InitialState, ScenarioSpec};
use crate::error::{Error, Result};
use crate::grw::peaks::ExitBand;
use crate::grw::{step_grw_continuous, step_grw_discrete, HitEvent};
use crate::numerics::stats::{mean, variance};
use crate::numerics::{gaussian_increments, ComplexField, SeededRng};

/// Fraction of replicas allowed to stay inside the band until the horizon.
pub const MAX_NON_EXIT_FRACTION: f64 = 0.05;
pub const DEFAULT_BAND: ExitBand = ExitBand { lo: 0.01, hi: 0.99 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollapseModel {
    Continuous,
    Discrete,
}

impl CollapseModel {
    pub fn label(self) -> &'static str {
        match self {
            CollapseModel::Continuous => "continuous",
            CollapseModel::Discrete => "discrete",
        }
    }
}

/// Mass on the side of the box closer to peak A (`x₁ < 0`); a cell on the
/// midpoint counts half.
pub fn peak_a_weight(psi: &ComplexField) -> f64 {
    let grid = psi.grid;
    let stride = grid.stride(0);
    let mut a = 0.0;
    let mut total = 0.0;
    for (idx, v) in psi.values.iter().enumerate() {
        let m = v.norm_sqr();
        let j = (idx / stride) % grid.n;
        let x = grid.coord(j);
        if x < 0.0 {
            a += m;
        } else if x == 0.0 {
            a += 0.5 * m;
        }
        total += m;
    }
    a / total
}

#[derive(Debug, Clone)]
struct Trace {
    /// `p_t` at each output step, frozen after exit.
    p: Vec<f64>,
    exit_time: Option<f64>,
    chose_a: bool,
    events: Vec<HitEvent>,
}

/// Both models when the scenario sets `g > 0` and `λ > 0`; either alone
/// otherwise. The state must be a `two_gaussian` with `H = 0` intended.
pub fn run_collapse_statistics(scenario: &ScenarioSpec, band: ExitBand) -> Result<RunOutput> {
    scenario.validate()?;
    let p0 = match scenario.initial {
        InitialState::TwoGaussian { p0, .. } => p0,
        _ => {
            return Err(Error::InvalidParameter(
                "collapse statistics need a two_gaussian initial state".into(),
            ))
        }
    };
    let mut models = Vec::new();
    if scenario.grw.g > 0.0 {
        models.push(CollapseModel::Continuous);
    }
    if scenario.grw.lambda > 0.0 {
        models.push(CollapseModel::Discrete);
    }
    if models.is_empty() {
        return Err(Error::InvalidParameter(
            "collapse statistics need g > 0 or lambda > 0".into(),
        ));
    }

    let mut seeds = SeedManifest::new(scenario.seed);
    for m in &models {
        let (name, purpose) = match m {
            CollapseModel::Continuous => ("collapse_noise", stream::COLLAPSE_NOISE),
            CollapseModel::Discrete => ("hits", stream::HITS),
        };
        seeds = seeds.stream(name, &format!("substream(master, replica, {purpose})"));
    }
    let mut report = RunReport::new(
        "collapse_statistics",
        &scenario.name,
        scenario.hash(),
        seeds,
    );
    let mut artifacts = Artifacts::default();
    let psi0 = scenario.psi0()?;
    let p_init = peak_a_weight(&psi0);
    let r = scenario.replicas;
    let binomial = 3.0 * (p0 * (1.0 - p0) / r as f64).sqrt();
    report.scalar("p_initial", p_init);

    let mut fractions = Vec::new();
    for model in models {
        let traces = simulate(scenario, &psi0, model, band)?;
        let label = model.label();
        let fraction = traces.iter().filter(|t| t.chose_a).count() as f64 / r as f64;
        let stuck = traces.iter().filter(|t| t.exit_time.is_none()).count() as f64 / r as f64;
        let exit_times: Vec<f64> = traces.iter().filter_map(|t| t.exit_time).collect();
        report.scalar(&format!("{label}_fraction_a"), fraction);
        report.scalar(&format!("{label}_non_exit_fraction"), stuck);
        report.scalar(&format!("{label}_mean_exit_time"), mean(&exit_times));
        report.check(Assertion::within(
            format!("{label}: |terminal peak-A fraction - p0|"),
            fraction,
            p0,
            binomial,
        ));
        report.check(Assertion::at_most(
            format!("{label}: replicas without exit by the horizon"),
            stuck,
            MAX_NON_EXIT_FRACTION,
        ));

        let times: Vec<f64> = scenario
            .output_steps()
            .iter()
            .map(|&s| s as f64 * scenario.dt)
            .collect();
        let mut means = Vec::with_capacity(times.len());
        let mut worst: f64 = 0.0;
        for (k, t) in times.iter().enumerate() {
            let p: Vec<f64> = traces.iter().map(|tr| tr.p[k]).collect();
            let m = mean(&p);
            let mc = (variance(&p) / r as f64).sqrt();
            means.push(m);
            let a = Assertion::within(
                format!("{label}: |mean p_t - p_0| at t = {t}"),
                m,
                p_init,
                3.0 * mc + 1e-12,
            );
            if mc > 1e-12 {
                worst = worst.max((m - p_init).abs() / mc);
            }
            report.check(a);
        }
        report.scalar(&format!("{label}_max_martingale_z"), worst);
        report.series(&format!("mean_p_{label}"), times, means);
        for (replica, tr) in traces.iter().enumerate() {
            for e in &tr.events {
                artifacts
                    .events
                    .push(json!({"t": e.t, "i": e.i, "z": e.z, "replica": replica}));
            }
        }
        fractions.push(fraction);
    }
    if let [fc, fd] = fractions[..] {
        report.check(Assertion::within(
            "|continuous - discrete peak-A fraction|",
            fc,
            fd,
            3.0 * (2.0 * p0 * (1.0 - p0) / r as f64).sqrt(),
        ));
    }
    Ok(RunOutput { report, artifacts })
}

fn simulate(
    scenario: &ScenarioSpec,
    psi0: &ComplexField,
    model: CollapseModel,
    band: ExitBand,
) -> Result<Vec<Trace>> {
    let propagator = scenario.propagator()?;
    let coupling = scenario.coupling();
    let discrete = scenario.grw.discrete()?;
    let rates = discrete.rates(&scenario.masses);
    let outputs = scenario.output_steps();
    let steps = scenario.steps();
    let dt = scenario.dt;
    let dim = scenario.grid.dim;

    (0..scenario.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let purpose = match model {
                CollapseModel::Continuous => stream::COLLAPSE_NOISE,
                CollapseModel::Discrete => stream::HITS,
            };
            let mut rng = SeededRng::substream(scenario.seed, replica, purpose);
            let mut psi = psi0.clone();
            let mut p = peak_a_weight(&psi);
            let mut trace = Trace {
                p: Vec::with_capacity(outputs.len()),
                exit_time: None,
                chose_a: false,
                events: Vec::new(),
            };
            let mut next = outputs.iter().peekable();
            if next.peek() == Some(&&0) {
                trace.p.push(p);
                next.next();
            }
            for step in 1..=steps {
                if trace.exit_time.is_none() {
                    let t = (step - 1) as f64 * dt;
                    psi = match model {
                        CollapseModel::Continuous => {
                            let dw = gaussian_increments(&mut rng, dt, dim)?;
                            step_grw_continuous(&psi, &propagator, &coupling, &dw)?
                        }
                        CollapseModel::Discrete => {
                            let (next_psi, events) = step_grw_discrete(
                                &psi,
                                &propagator,
                                &rates,
                                discrete.sigma,
                                t,
                                &mut rng,
                            )?;
                            trace.events.extend(events);
                            next_psi
                        }
                    };
                    p = peak_a_weight(&psi);
                    if !band.contains(p) {
                        trace.exit_time = Some(step as f64 * dt);
                    }
                }
                if next.peek() == Some(&&step) {
                    trace.p.push(p);
                    next.next();
                }
                if trace.exit_time.is_some() && next.peek().is_none() {
                    break;
                }
            }
            while trace.p.len() < outputs.len() {
                trace.p.push(p);
            }
            trace.chose_a = p >= 0.5;
            Ok(trace)
        })
        .collect()
}
