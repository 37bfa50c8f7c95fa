use serde_json::json;
use sha2::{Digest, Sha256};

use super::cosim::CoSimulation;
use super::report::{Artifacts, Assertion, RunOutput, RunReport, SeedManifest, Snapshot};
use super::scenario::{InitialState, ScenarioSpec};
use crate::error::{Error, Result};
use crate::filter::conditional_variance;
use crate::numerics::expectation_position;
use crate::numerics::snapshot::IncrementPath;
use crate::schrodinger::polar_amplitude;

/// `L1(|ψ|², ρ)` above which the co-simulation is abandoned.
pub const EQUIVALENCE_ABORT_L1: f64 = 0.5;
/// Acceptance bound on `max_t L1(|ψ_t|², ρ_t)`.
pub const EQUIVALENCE_L1: f64 = 0.05;
/// Factor in the mean-agreement bound `|⟨x⟩_ψ − ⟨x⟩_ρ| ≤ c·L1·L`.
pub const MEAN_AGREEMENT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceOptions {
    /// Observation noise is drawn at `dt/noise_substeps`.
    pub noise_substeps: u32,
    /// Start ρ from this state's `|φ|²` instead of `|ψ₀|²`.
    pub mismatched_prior: Option<InitialState>,
    pub l1_tolerance: f64,
    pub replica: u64,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            noise_substeps: 1,
            mismatched_prior: None,
            l1_tolerance: EQUIVALENCE_L1,
            replica: 0,
        }
    }
}

/// Co-drive `|ψ|²` and ρ with one innovations path and record how far
/// apart they drift.
pub fn run_equivalence(scenario: &ScenarioSpec, options: &EquivalenceOptions) -> Result<RunOutput> {
    scenario.validate()?;
    let grid = scenario.grid;
    let propagator = scenario.propagator()?;
    let psi0 = scenario.psi0()?;
    let rho0 = match &options.mismatched_prior {
        Some(state) => Some(polar_amplitude(&state.build(&grid)?)?),
        None => None,
    };
    let mut sim = CoSimulation::new(
        &propagator,
        &scenario.masses,
        scenario.coupling(),
        psi0,
        rho0,
        scenario.seed,
        options.replica,
        options.noise_substeps,
    )?;

    let seeds = SeedManifest::new(scenario.seed)
        .stream(
            "initial_position",
            &format!("substream(master, {}, 0)", options.replica),
        )
        .stream(
            "observation_noise",
            &format!(
                "substream(master, {}, 1), {} draw(s) per step",
                options.replica, options.noise_substeps
            ),
        );
    let mut report = RunReport::new("equivalence", &scenario.name, scenario.hash(), seeds);
    let mut artifacts = Artifacts::default();

    let dim = grid.dim;
    let dt = scenario.dt;
    let mut dy_path = IncrementPath::new(dt, dim);
    let mut dw_psi = IncrementPath::new(dt, dim);
    let mut dw_rho = IncrementPath::new(dt, dim);
    let (mut ts, mut l1s, mut mean_gaps) = (vec![0.0], vec![sim.l1()?], vec![0.0]);
    let mut xs = vec![sim.x[0]];
    let outputs = scenario.output_steps();
    let record_output = |sim: &CoSimulation, artifacts: &mut Artifacts, l1: f64| -> Result<()> {
        let t = sim.time();
        let born = polar_amplitude(&sim.psi)?;
        let mean = expectation_position(&sim.rho)?;
        artifacts.events.push(json!({
            "t": t,
            "mean": mean,
            "var": conditional_variance(&sim.rho, &mean),
            "l1_vs_psi2": l1,
        }));
        artifacts.snapshots.push((
            format!("psi_t{t:.4}"),
            Snapshot::Complex {
                t,
                field: sim.psi.clone(),
            },
        ));
        artifacts.snapshots.push((
            format!("rho_t{t:.4}"),
            Snapshot::Density {
                t,
                field: sim.rho.clone(),
            },
        ));
        artifacts.snapshots.push((
            format!("born_t{t:.4}"),
            Snapshot::Density { t, field: born },
        ));
        Ok(())
    };
    if outputs.first() == Some(&0) {
        record_output(&sim, &mut artifacts, l1s[0])?;
    }
    for step in 1..=scenario.steps() {
        let s = sim.step()?;
        dy_path.push(s.dy);
        // what each side actually consumed
        dw_psi.push(s.dw.clone());
        dw_rho.push(s.dw);
        let l1 = sim.l1()?;
        let mean_psi = expectation_position(&polar_amplitude(&sim.psi)?)?;
        let mean_rho = expectation_position(&sim.rho)?;
        let gap = mean_psi
            .iter()
            .zip(&mean_rho)
            .map(|(a, b)| grid.min_image(a - b).abs())
            .fold(0.0, f64::max);
        ts.push(sim.time());
        l1s.push(l1);
        mean_gaps.push(gap);
        xs.push(sim.x[0]);
        if outputs.binary_search(&step).is_ok() {
            record_output(&sim, &mut artifacts, l1)?;
        }
        if !(l1 <= EQUIVALENCE_ABORT_L1) {
            return Err(Error::EquivalenceBroken { t: sim.time(), l1 });
        }
    }

    let max_l1 = l1s.iter().cloned().fold(0.0, f64::max);
    let final_l1 = *l1s.last().unwrap();
    let max_gap = mean_gaps.iter().cloned().fold(0.0, f64::max);
    let hash_psi = hex::encode(Sha256::digest(dw_psi.to_le_bytes()));
    let hash_rho = hex::encode(Sha256::digest(dw_rho.to_le_bytes()));
    report.scalar("max_l1", max_l1);
    report.scalar("final_l1", final_l1);
    report.scalar("max_mean_gap", max_gap);
    report.scalar("steps", scenario.steps() as f64);
    report.series("l1_psi2_rho", ts.clone(), l1s);
    report.series("mean_gap", ts.clone(), mean_gaps);
    report.series("x_true", ts, xs);
    report.check(Assertion::at_most(
        "max_t L1(|psi|^2, rho)",
        max_l1,
        options.l1_tolerance,
    ));
    report.check(Assertion::holds(
        format!("dW inputs byte-identical (sha256 {hash_psi})"),
        hash_psi == hash_rho,
    ));
    report.check(Assertion::at_most(
        "max_t |<x>_psi - <x>_rho| / (L1 * box length)",
        max_gap / (max_l1.max(f64::MIN_POSITIVE) * grid.length()),
        MEAN_AGREEMENT_FACTOR,
    ));
    artifacts.paths.push(("dY".into(), dy_path));
    artifacts.paths.push(("dW".into(), dw_psi));
    Ok(RunOutput { report, artifacts })
}

/// Result of the `dt`-halving study.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub coarse: RunOutput,
    pub fine: RunOutput,
    pub improvement: f64,
}

/// Run at `dt` and `dt/2` on one Brownian path (noise drawn at `dt/2`);
/// `options.noise_substeps` is ignored.
pub fn run_equivalence_convergence(
    scenario: &ScenarioSpec,
    options: &EquivalenceOptions,
) -> Result<ConvergenceStudy> {
    let coarse = run_equivalence(
        scenario,
        &EquivalenceOptions {
            noise_substeps: 2,
            ..options.clone()
        },
    )?;
    let fine = run_equivalence(
        &scenario.with_dt(0.5 * scenario.dt),
        &EquivalenceOptions {
            noise_substeps: 1,
            ..options.clone()
        },
    )?;
    let improvement = coarse.report.scalars["max_l1"] / fine.report.scalars["max_l1"];
    Ok(ConvergenceStudy {
        coarse,
        fine,
        improvement,
    })
}
