//! Discrete hits against the continuous model, on the analytic-peaks fast
//! path: the continuum limit along `2λ/σ² = g²`, the mass-proportional hit
//! rates and the `Nλ` amplification of suppression.

use super::report::{Artifacts, Assertion, RunOutput, RunReport, SeedManifest};
use super::scenario::{InitialState, ScenarioSpec};
use crate::error::{Error, Result};
use crate::grw::peaks::{
    continuous_at, evolve_discrete, two_site_continuous_cdf, ExitBand, PeakState,
};
use crate::grw::{sample_hit_schedule, GrwDiscreteParams};
use crate::numerics::stats::{ks_critical_one_percent, ks_one_sample, mean, variance};
use crate::numerics::SeededRng;
use crate::schrodinger::MassSpec;

pub const FINAL_RUNG_DISTANCE: f64 = 0.1;
pub const FINAL_RUNG_VARIANCE_GAP: f64 = 0.1;
pub const RATE_TOLERANCE: f64 = 0.05;
pub const AMPLIFICATION_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumOptions {
    pub ladder: Vec<f64>,
    /// `σ` is multiplied by this factor in the negative control.
    pub mis_scale: f64,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self {
            ladder: vec![10.0, 100.0, 1000.0],
            mis_scale: 2.0,
        }
    }
}

fn two_peaks(scenario: &ScenarioSpec) -> Result<PeakState> {
    match scenario.initial {
        InitialState::TwoGaussian { p0, separation, .. } => PeakState::two(p0, separation),
        _ => Err(Error::InvalidParameter(
            "the fast path needs a two_gaussian initial state".into(),
        )),
    }
}

/// Effective coupling of a bulk two-site superposition: `sqrt(Σ Gᵢ²)`.
fn effective_coupling(scenario: &ScenarioSpec) -> f64 {
    scenario
        .coupling()
        .iter()
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// `E[p²]` under the continuous model, `∫₀¹ 2q(1 − F(q)) dq` by Simpson's rule.
fn continuous_second_moment(state: &PeakState, g: f64, t: f64) -> Result<f64> {
    let n = 4000;
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let q = k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * 2.0 * q * (1.0 - two_site_continuous_cdf(state, g, t, q)?);
    }
    Ok(acc * h / 3.0)
}

/// Kolmogorov distance of the discrete-model `p_t` law from the exact
/// continuous law, per ladder rung, at `t = horizon`. Uses `replicas` runs
/// per rung and the scenario's `g` and two-gaussian state; the grid is not
/// used.
pub fn run_continuum_limit(
    scenario: &ScenarioSpec,
    options: &ContinuumOptions,
) -> Result<RunOutput> {
    let state = two_peaks(scenario)?;
    let g = effective_coupling(scenario);
    if !(g > 0.0) {
        return Err(Error::InvalidParameter(
            "the continuum limit needs g > 0".into(),
        ));
    }
    if options.ladder.is_empty() || options.ladder.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParameter(
            "the lambda ladder needs positive rungs".into(),
        ));
    }
    let t = scenario.horizon;
    let runs = scenario.replicas;
    let cdf = |q: f64| two_site_continuous_cdf(&state, g, t, q).expect("two sites");
    let separation = state.sites[1] - state.sites[0];
    let var_continuous = {
        let m2 = continuous_second_moment(&state, g, t)?;
        let m1 = state.weights[0];
        separation * separation * (m2 - m1 * m1)
    };
    let critical = ks_critical_one_percent(runs);

    let seeds = SeedManifest::new(scenario.seed)
        .stream("continuous_sampler", "split(master, 0)")
        .stream("ladder", "split(master, 1 + rung)")
        .stream("mis_scaled_ladder", "split(master, 101 + rung)");
    let mut report = RunReport::new("continuum_limit", &scenario.name, scenario.hash(), seeds);
    report.scalar("g_effective", g);
    report.scalar("t", t);
    report.scalar("var_mean_x_continuous", var_continuous);

    let mut rng = SeededRng::split(scenario.seed, 0);
    let sampled: Vec<f64> = (0..runs)
        .map(|_| continuous_at(&state, g, t, &mut rng)[0])
        .collect();
    let self_distance = ks_one_sample(&sampled, cdf);
    report.scalar("continuous_self_distance", self_distance);
    report.check(Assertion::at_most(
        "continuous sampler vs its exact law",
        self_distance,
        critical,
    ));

    let rung = |lambda: f64, scale: f64, stream: u64| -> Result<(f64, f64)> {
        let params = GrwDiscreteParams::on_continuum_curve(lambda, g)?;
        let sigma = scale * params.sigma;
        let mut rng = SeededRng::split(scenario.seed, stream);
        let p: Vec<f64> = (0..runs)
            .map(|_| {
                evolve_discrete(&state, &[lambda], sigma, t, None, &mut rng).map(|o| o.weights[0])
            })
            .collect::<Result<_>>()?;
        let var_x = separation * separation * variance(&p);
        Ok((ks_one_sample(&p, cdf), var_x))
    };

    let mut distances = Vec::new();
    let mut gaps = Vec::new();
    let mut mis = Vec::new();
    for (i, &lambda) in options.ladder.iter().enumerate() {
        let (d, var_x) = rung(lambda, 1.0, 1 + i as u64)?;
        let (dm, _) = rung(lambda, options.mis_scale, 101 + i as u64)?;
        let gap = (var_x / var_continuous - 1.0).abs();
        report.scalar(&format!("distance_lambda{lambda}"), d);
        report.scalar(&format!("var_gap_lambda{lambda}"), gap);
        report.scalar(&format!("mis_scaled_distance_lambda{lambda}"), dm);
        distances.push(d);
        gaps.push(gap);
        mis.push(dm);
    }
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let gaps_decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *distances.last().unwrap();
    report.check(Assertion::holds(
        "Kolmogorov distance decreases along the ladder",
        decreasing,
    ));
    report.check(Assertion::at_most(
        "Kolmogorov distance at the final rung",
        last,
        FINAL_RUNG_DISTANCE,
    ));
    report.check(Assertion::holds(
        "Var<x> discrepancy decreases along the ladder",
        gaps_decreasing,
    ));
    report.check(Assertion::at_most(
        "relative Var<x> discrepancy at the final rung",
        *gaps.last().unwrap(),
        FINAL_RUNG_VARIANCE_GAP,
    ));
    report.check(Assertion::at_least(
        "mis-scaled control: distance at the final rung",
        *mis.last().unwrap(),
        FINAL_RUNG_DISTANCE,
    ));
    report.series("distance", options.ladder.clone(), distances);
    report.series("var_gap", options.ladder.clone(), gaps);
    report.series("mis_scaled_distance", options.ladder.clone(), mis);
    Ok(RunOutput {
        report,
        artifacts: Artifacts::default(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateLawOptions {
    pub lambda: f64,
    /// Masses of the two particles whose hit counts are compared.
    pub masses: [f64; 2],
    pub horizon: f64,
    pub runs: usize,
    /// Particle counts for the amplification study.
    pub particles: Vec<usize>,
    pub amplification_runs: usize,
    pub seed: u64,
}

impl Default for RateLawOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            masses: [1.0, 2.0],
            horizon: 1e4,
            runs: 10,
            particles: vec![1, 10, 100, 1000, 10_000],
            amplification_runs: 10_000,
            seed: 5,
        }
    }
}

/// Hit counts per particle against `λᵢ = (mᵢ/m)λ`, and the rate at which
/// an `N`-particle bulk superposition loses its minority branch against
/// `Nλ`. Amplification uses `σ = d/5`, where a single hit collapses the
/// branch with probability above 0.99.
pub fn run_rate_law(options: &RateLawOptions) -> Result<RunOutput> {
    let seeds = SeedManifest::new(options.seed)
        .stream("hit_counts", "split(master, run)")
        .stream(
            "amplification",
            "split(master, 1000 + particle_count_index)",
        );
    let mut report = RunReport::new("rate_law", "fast_path", String::new(), seeds);
    let masses = MassSpec::new(options.masses.to_vec())?;
    let params = GrwDiscreteParams::new(options.lambda, 1.0)?;
    let rates = params.rates(&masses);

    let mut counts = [0usize; 2];
    for run in 0..options.runs {
        let mut rng = SeededRng::split(options.seed, run as u64);
        for (_, i) in sample_hit_schedule(&rates, 0.0, options.horizon, &mut rng) {
            counts[i] += 1;
        }
    }
    let exposure = options.horizon * options.runs as f64;
    for (i, (&c, &rate)) in counts.iter().zip(&rates).enumerate() {
        let measured = c as f64 / exposure;
        report.scalar(&format!("rate_{i}"), measured);
        report.check(Assertion::at_most(
            format!("|hit rate / lambda_{i} - 1|"),
            (measured / rate - 1.0).abs(),
            RATE_TOLERANCE,
        ));
    }
    let ratio = counts[1] as f64 / counts[0] as f64;
    let expected = options.masses[1] / options.masses[0];
    report.scalar("count_ratio", ratio);
    report.check(Assertion::at_most(
        "|count ratio / mass ratio - 1|",
        (ratio / expected - 1.0).abs(),
        RATE_TOLERANCE,
    ));

    let separation = 4.0;
    let sigma = separation / 5.0;
    let state = PeakState::two(0.5, separation)?;
    let band = ExitBand { lo: 0.01, hi: 0.99 };
    let mut ns = Vec::new();
    let mut normalized = Vec::new();
    for (k, &n) in options.particles.iter().enumerate() {
        let rates = vec![options.lambda; n];
        let total = options.lambda * n as f64;
        let horizon = 50.0 / total;
        let mut rng = SeededRng::split(options.seed, 1000 + k as u64);
        let mut times = Vec::with_capacity(options.amplification_runs);
        for _ in 0..options.amplification_runs {
            let out = evolve_discrete(&state, &rates, sigma, horizon, Some(band), &mut rng)?;
            times.push(out.exit_time.unwrap_or(horizon));
        }
        let rate = 1.0 / mean(&times);
        report.scalar(&format!("suppression_rate_n{n}"), rate);
        ns.push(n as f64);
        normalized.push(rate / total);
        report.check(Assertion::at_most(
            format!("|suppression rate / (N lambda) - 1| at N = {n}"),
            (rate / total - 1.0).abs(),
            AMPLIFICATION_TOLERANCE,
        ));
    }
    report.series("suppression_rate_over_n_lambda", ns, normalized);
    Ok(RunOutput {
        report,
        artifacts: Artifacts::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::presets;

    #[test]
    fn second_moment_matches_sampling() {
        let state = PeakState::two(0.7, 4.0).unwrap();
        let m2 = continuous_second_moment(&state, 1.0, 0.125).unwrap();
        let mut rng = SeededRng::new(2);
        let p: Vec<f64> = (0..40_000)
            .map(|_| continuous_at(&state, 1.0, 0.125, &mut rng)[0])
            .collect();
        let mc: f64 = p.iter().map(|x| x * x).sum::<f64>() / p.len() as f64;
        assert!((m2 - mc).abs() < 0.005, "{m2} vs {mc}");
        // t → 0 leaves the weight at p0
        let m0 = continuous_second_moment(&state, 1.0, 1e-12).unwrap();
        assert!((m0 - 0.49).abs() < 1e-3, "{m0}");
    }

    #[test]
    fn small_rate_law_run_passes() {
        let out = run_rate_law(&RateLawOptions {
            horizon: 2000.0,
            runs: 5,
            particles: vec![1, 100],
            amplification_runs: 2000,
            ..RateLawOptions::default()
        })
        .unwrap();
        assert!(
            out.report.passed,
            "{:#?}",
            out.report.failures().collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_single_packets() {
        let s = presets::free_gaussian();
        assert!(run_continuum_limit(&s, &ContinuumOptions::default()).is_err());
    }
}
