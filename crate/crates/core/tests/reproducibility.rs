//! Reports are functions of the scenario and its seed alone.

use bmgrw::harness::{
    presets, run_bohm, run_equivalence, run_grw_discrete, run_rate_law, EquivalenceOptions,
    RateLawOptions, ScenarioSpec,
};

fn short(mut s: ScenarioSpec) -> ScenarioSpec {
    s.horizon = 0.2;
    s.output_times = vec![0.0, 0.1, 0.2];
    s
}

#[test]
fn reruns_are_bit_identical() {
    let s = short(presets::two_peak());
    assert_eq!(
        run_grw_discrete(&s).unwrap().report.hash(),
        run_grw_discrete(&s).unwrap().report.hash()
    );
    let mut b = short(presets::two_slit());
    b.replicas = 200;
    let (x, y) = (run_bohm(&b).unwrap(), run_bohm(&b).unwrap());
    assert_eq!(x.report.to_json(), y.report.to_json());
    assert_eq!(
        x.artifacts.trajectories.unwrap().positions,
        y.artifacts.trajectories.unwrap().positions
    );
}

#[test]
fn the_seed_matters() {
    let a = short(presets::free_gaussian());
    let mut b = a.clone();
    b.seed += 1;
    let run = |s: &ScenarioSpec| {
        run_equivalence(s, &EquivalenceOptions::default())
            .unwrap()
            .report
    };
    let (ra, rb) = (run(&a), run(&b));
    assert_ne!(ra.hash(), rb.hash());
    assert_eq!(ra.seeds.master, a.seed);
}

#[test]
fn equivalence_densities_share_one_innovations_path() {
    let s = short(presets::free_gaussian());
    let out = run_equivalence(&s, &EquivalenceOptions::default()).unwrap();
    let passed = |needle: &str| {
        out.report
            .assertions
            .iter()
            .find(|a| a.name.contains(needle))
            .unwrap_or_else(|| {
                panic!(
                    "no assertion mentioning {needle}: {:#?}",
                    out.report.assertions
                )
            })
            .passed
    };
    assert!(passed("byte-identical"));
    assert!(passed("<x>_psi - <x>_rho"));
}

#[test]
fn rate_law_reruns_match() {
    let o = RateLawOptions {
        horizon: 200.0,
        runs: 2,
        particles: vec![1, 10],
        amplification_runs: 100,
        ..RateLawOptions::default()
    };
    assert_eq!(
        run_rate_law(&o).unwrap().report.hash(),
        run_rate_law(&o).unwrap().report.hash()
    );
}
