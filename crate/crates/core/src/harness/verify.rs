//! The acceptance suite: ten criteria, each a bundle of assertions over one
//! or more run reports.

use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::collapse::{run_collapse_statistics, DEFAULT_BAND};
use super::continuum::{run_continuum_limit, run_rate_law, ContinuumOptions, RateLawOptions};
use super::equilibrium::{family, run_equilibrium_under_collapse, EquilibriumOptions};
use super::equivalence::{run_equivalence, run_equivalence_convergence, EquivalenceOptions};
use super::oracle::{run_oracle_triangle, OracleOptions};
use super::report::{Assertion, RunReport, SeedManifest};
use super::runs::run_bohm;
use super::scenario::{presets, GrwSettings, InitialState, ScenarioSpec};
use crate::error::{Error, Result};
use crate::filter::conditional_variance;
use crate::grw::step_grw_continuous;
use crate::numerics::{expectation_position, Grid};
use crate::schrodinger::{polar_amplitude, MassSpec, PotentialSpec};

/// Minimum `max L1(dt) / max L1(dt/2)` in the equivalence study.
pub const HALVING_IMPROVEMENT: f64 = 1.5;
/// Relative tolerance on the free-packet width law.
pub const WIDTH_LAW_TOLERANCE: f64 = 1e-6;
/// Wall-clock budget for the quick suite.
pub const QUICK_SUITE_BUDGET_S: f64 = 1800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    Quick,
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "reduction to unitary evolution"),
    (2, "equivariance without collapse"),
    (3, "Born-rule collapse statistics"),
    (4, "filter/GRW equivalence"),
    (5, "quantum equilibrium under collapse"),
    (6, "innovations are Brownian"),
    (7, "oracle triangle"),
    (8, "continuum limit"),
    (9, "rate law and amplification"),
    (10, "determinism of the quick suite"),
];

/// Full-mode wall-clock budget in seconds, where one is set.
pub fn budget(id: u32) -> Option<f64> {
    match id {
        1 => Some(60.0),
        2 => Some(300.0),
        3 | 4 => Some(600.0),
        5 | 8 => Some(1200.0),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    /// The assertions that decide the criterion.
    pub assertions: Vec<Assertion>,
    pub reports: Vec<RunReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CriterionOutcome {
    /// SHA-256 over the serialized reports (wall clock excluded).
    pub fn reports_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.reports).expect("reports serialize");
        hex::encode(Sha256::digest(bytes))
    }

    /// One line: `criterion 4 PASS (12.3 s) filter/GRW equivalence`.
    pub fn summary(&self) -> String {
        format!(
            "criterion {:>2} {} ({:.1} s) {}{}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.title,
            self.error
                .as_ref()
                .map(|e| format!(": {e}"))
                .unwrap_or_default()
        )
    }
}

struct Checks {
    assertions: Vec<Assertion>,
    reports: Vec<RunReport>,
}

impl Checks {
    fn new() -> Self {
        Self {
            assertions: Vec::new(),
            reports: Vec::new(),
        }
    }

    /// Adopt every assertion of `report`.
    fn all(&mut self, report: RunReport) {
        self.assertions.extend(report.assertions.iter().cloned());
        self.reports.push(report);
    }
}

fn reseed(mut s: ScenarioSpec, seed: Option<u64>) -> ScenarioSpec {
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s
}

fn shorten(mut s: ScenarioSpec, horizon: f64) -> ScenarioSpec {
    s.horizon = horizon;
    s.output_times.retain(|t| *t <= horizon + 0.5 * s.dt);
    if !s.output_times.contains(&horizon) {
        s.output_times.push(horizon);
    }
    s
}

/// Run one criterion; criterion 10 runs the quick suite twice.
pub fn run_criterion(id: u32, mode: Mode, seed: Option<u64>) -> CriterionOutcome {
    let start = Instant::now();
    let title = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map_or("unknown criterion", |(_, t)| t)
        .to_string();
    let result = match id {
        1 => reduction(),
        2 => equivariance(mode, seed),
        3 => collapse(mode, seed),
        4 => equivalence(mode, seed),
        5 => equilibrium(mode, seed),
        6 => innovations(mode, seed),
        7 => oracle(mode, seed),
        8 => continuum(mode, seed),
        9 => rate_law(mode, seed),
        10 => determinism(None, seed),
        _ => Err(Error::InvalidParameter(format!("no criterion {id}"))),
    };
    finish(id, title, mode, start, result)
}

fn finish(
    id: u32,
    title: String,
    mode: Mode,
    start: Instant,
    result: Result<Checks>,
) -> CriterionOutcome {
    let elapsed = start.elapsed();
    match result {
        Ok(mut checks) => {
            if let (Mode::Full, Some(limit)) = (mode, budget(id)) {
                checks.assertions.push(Assertion::at_most(
                    "wall clock (s)",
                    elapsed.as_secs_f64(),
                    limit,
                ));
            }
            CriterionOutcome {
                id,
                title,
                passed: !checks.assertions.is_empty() && checks.assertions.iter().all(|a| a.passed),
                assertions: checks.assertions,
                reports: checks.reports,
                error: None,
                elapsed,
            }
        }
        Err(e) => CriterionOutcome {
            id,
            title,
            passed: false,
            assertions: Vec::new(),
            reports: Vec::new(),
            error: Some(e.to_string()),
            elapsed,
        },
    }
}

/// Criteria 1 to 9, then criterion 10. In quick mode the first pass doubles
/// as the first half of the determinism check.
pub fn run_suite(mode: Mode, seed: Option<u64>) -> Vec<CriterionOutcome> {
    let mut out: Vec<CriterionOutcome> = (1..=9).map(|id| run_criterion(id, mode, seed)).collect();
    let start = Instant::now();
    let first = if mode == Mode::Quick {
        Some(out.as_slice())
    } else {
        None
    };
    let title = CRITERIA[9].1.to_string();
    let det = finish(10, title, mode, start, determinism(first, seed));
    out.push(det);
    out
}

/// Run the quick suite (criteria 1 to 9) and compare report hashes with a
/// second run, or with `first` when given.
fn determinism(first: Option<&[CriterionOutcome]>, seed: Option<u64>) -> Result<Checks> {
    let quick = |elapsed: &mut f64| -> Vec<CriterionOutcome> {
        let v: Vec<CriterionOutcome> = (1..=9)
            .map(|id| run_criterion(id, Mode::Quick, seed))
            .collect();
        *elapsed = v.iter().map(|o| o.elapsed.as_secs_f64()).sum();
        v
    };
    let mut t_a = 0.0;
    let owned;
    let a = match first {
        Some(a) => {
            t_a = a.iter().map(|o| o.elapsed.as_secs_f64()).sum();
            a
        }
        None => {
            owned = quick(&mut t_a);
            owned.as_slice()
        }
    };
    let mut t_b = 0.0;
    let b = quick(&mut t_b);
    let mut checks = Checks::new();
    for (x, y) in a.iter().zip(&b) {
        let same = x.error.is_none() && y.error.is_none() && x.reports_hash() == y.reports_hash();
        checks.assertions.push(Assertion::holds(
            format!(
                "criterion {} quick reports bit-identical (sha256 {})",
                x.id,
                x.reports_hash()
            ),
            same,
        ));
    }
    checks.assertions.push(Assertion::at_most(
        "quick suite wall clock (s)",
        t_a.max(t_b),
        QUICK_SUITE_BUDGET_S,
    ));
    Ok(checks)
}

fn reduction() -> Result<Checks> {
    let s = ScenarioSpec {
        name: "reduction".into(),
        grid: Grid {
            dim: 1,
            n: 512,
            a: -32.0,
            b: 32.0,
        },
        potential: PotentialSpec::Free,
        masses: MassSpec::uniform(1, 1.0),
        initial: InitialState::Gaussian {
            center: vec![0.0],
            width: 1.0,
            momentum: vec![0.0],
        },
        grw: GrwSettings::default(),
        kinetic: true,
        horizon: 1.0,
        dt: 1e-3,
        output_times: vec![0.0, 1.0],
        seed: 0,
        replicas: 1,
    };
    s.validate()?;
    let propagator = s.propagator()?;
    let mut unitary = s.psi0()?;
    let mut collapse = unitary.clone();
    let mut identical = true;
    for _ in 0..s.steps() {
        unitary = propagator.step(&unitary)?;
        collapse = step_grw_continuous(&collapse, &propagator, &[0.0], &[0.37])?;
        identical &= unitary.values == collapse.values;
    }
    let rho = polar_amplitude(&collapse)?;
    let width2 = conditional_variance(&rho, &expectation_position(&rho)?)[0];
    // |ψ|² width s with ψ ∝ exp(−x²/4s²), unit mass
    let (s0, t) = (1.0f64, s.horizon);
    let expected = s0 * s0 * (1.0 + t * t / (4.0 * s0.powi(4)));
    let mut report = RunReport::new("reduction", &s.name, s.hash(), SeedManifest::new(0));
    report.scalar("width2", width2);
    report.scalar("width2_expected", expected);
    report.check(Assertion::holds(
        "g = 0 collapse step bit-identical to the unitary step",
        identical,
    ));
    report.check(Assertion::at_most(
        "|width^2(t=1) / analytic - 1|",
        (width2 / expected - 1.0).abs(),
        WIDTH_LAW_TOLERANCE,
    ));
    let mut c = Checks::new();
    c.all(report);
    Ok(c)
}

fn equivariance(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let mut s = reseed(presets::two_slit(), seed);
    if mode == Mode::Quick {
        s.replicas = 2000;
    }
    let out = run_bohm(&s)?;
    let mut c = Checks::new();
    c.assertions.push(Assertion::at_most(
        "trajectories crossing the symmetry axis",
        out.report.scalars["axis_crossings"],
        0.0,
    ));
    c.all(out.report);
    Ok(c)
}

fn collapse(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let mut s = reseed(presets::two_peak(), seed);
    if mode == Mode::Quick {
        s.replicas = 500;
    }
    let mut c = Checks::new();
    c.all(run_collapse_statistics(&s, DEFAULT_BAND)?.report);
    Ok(c)
}

/// ρ's prior shifted by this much in the broken-equilibrium control.
const MISMATCH_SHIFT: f64 = 0.5;

fn equivalence(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let mut s = reseed(presets::free_gaussian(), seed);
    if mode == Mode::Quick {
        s = shorten(s, 0.5);
    }
    let study = run_equivalence_convergence(&s, &EquivalenceOptions::default())?;
    let mut c = Checks::new();
    c.assertions.push(Assertion::at_least(
        "max L1 at dt / max L1 at dt/2",
        study.improvement,
        HALVING_IMPROVEMENT,
    ));
    let coarse_max = study.coarse.report.scalars["max_l1"];
    c.all(study.coarse.report);
    c.reports.push(study.fine.report);

    let InitialState::Gaussian {
        center,
        width,
        momentum,
    } = s.initial.clone()
    else {
        return Err(Error::InvalidParameter(
            "the equivalence control shifts a gaussian".into(),
        ));
    };
    let shifted = InitialState::Gaussian {
        center: center.iter().map(|x| x + MISMATCH_SHIFT).collect(),
        width,
        momentum,
    };
    let control = run_equivalence(
        &s,
        &EquivalenceOptions {
            mismatched_prior: Some(shifted),
            ..EquivalenceOptions::default()
        },
    );
    let (name, measured) = match control {
        Ok(out) => {
            let final_l1 = out.report.scalars["final_l1"];
            c.reports.push(out.report);
            (
                "mismatched prior: final L1 / matched max L1",
                final_l1 / coarse_max,
            )
        }
        Err(Error::EquivalenceBroken { .. }) => (
            "mismatched prior: run aborted as EquivalenceBroken",
            f64::INFINITY,
        ),
        Err(e) => return Err(e),
    };
    c.assertions.push(Assertion::at_least(name, measured, 10.0));
    Ok(c)
}

fn equilibrium_scenario(mode: Mode, seed: Option<u64>) -> ScenarioSpec {
    let mut s = reseed(presets::equilibrium(), seed);
    if mode == Mode::Quick {
        s.replicas = 150;
    }
    s
}

fn equilibrium(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let s = equilibrium_scenario(mode, seed);
    let run = run_equilibrium_under_collapse(&s, EquilibriumOptions::default())?;
    let control = run_equilibrium_under_collapse(
        &s,
        EquilibriumOptions {
            freeze_particle: true,
        },
    )?;
    let mut c = Checks::new();
    c.assertions.extend(family(&run.report, "pit").cloned());
    let control_failed = family(&control.report, "pit")
        .filter(|a| !a.name.ends_with("t = 0"))
        .any(|a| !a.passed);
    c.assertions.push(Assertion::holds(
        "frozen-particle control fails the KS test",
        control_failed,
    ));
    c.reports.push(run.report);
    c.reports.push(control.report);
    Ok(c)
}

fn innovations(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let s = equilibrium_scenario(mode, seed);
    let run = run_equilibrium_under_collapse(&s, EquilibriumOptions::default())?;
    let mut c = Checks::new();
    c.assertions
        .extend(family(&run.report, "innovations").cloned());
    c.reports.push(run.report);
    Ok(c)
}

fn oracle(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let mut b = reseed(presets::free_gaussian(), seed);
    let mut l = reseed(presets::linear_filter(), seed);
    if mode == Mode::Quick {
        b = shorten(b, 0.5);
        l = shorten(l, 1.0);
    }
    let mut c = Checks::new();
    c.all(run_oracle_triangle(&b, &l, &OracleOptions::default())?.report);
    Ok(c)
}

fn continuum(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let mut s = reseed(presets::continuum(), seed);
    if mode == Mode::Quick {
        s.replicas = 50_000;
    }
    let mut c = Checks::new();
    c.all(run_continuum_limit(&s, &ContinuumOptions::default())?.report);
    Ok(c)
}

fn rate_law(mode: Mode, seed: Option<u64>) -> Result<Checks> {
    let mut o = RateLawOptions::default();
    if let Some(seed) = seed {
        o.seed = seed;
    }
    if mode == Mode::Quick {
        o.horizon = 2000.0;
        o.runs = 5;
        o.amplification_runs = 2000;
    }
    let mut c = Checks::new();
    c.all(run_rate_law(&o)?.report);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_is_exact() {
        let o = run_criterion(1, Mode::Quick, None);
        assert!(o.passed, "{:#?}", o);
        assert!(o.summary().starts_with("criterion  1 PASS"));
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        let o = run_criterion(11, Mode::Quick, None);
        assert!(!o.passed);
        assert!(o.error.is_some());
    }

    #[test]
    fn shorten_keeps_the_horizon_as_output() {
        let s = shorten(presets::free_gaussian(), 0.5);
        assert_eq!(s.output_times, vec![0.0, 0.25, 0.5]);
        s.validate().unwrap();
    }
}
