use std::path::PathBuf;

use bmgrw_cli::{parse_config, Overrides, RunConfig, Threads};

fn resolved(text: &str, preset: &str) -> RunConfig {
    parse_config(text)
        .unwrap()
        .resolve(&Overrides::default(), Some(preset), PathBuf::from("out"))
        .unwrap()
}

#[test]
fn minimal_config_echo_is_complete_and_byte_stable() {
    let a = resolved("scenario = \"free_gaussian\"\n", "two_peak");
    let echo = a.to_toml().unwrap();
    for key in [
        "output_dir",
        "seed",
        "threads",
        "emit",
        "[scenario.grid]",
        "[filter.drift]",
        "[rate_law]",
    ] {
        assert!(echo.contains(key), "{key} missing from\n{echo}");
    }
    let b = resolved("scenario = \"free_gaussian\"\n", "two_peak");
    assert_eq!(echo, b.to_toml().unwrap());
}

#[test]
fn resolved_config_round_trips() {
    for preset in bmgrw::harness::presets::NAMES {
        let cfg = resolved("", preset);
        let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg, "{preset}");
        assert_eq!(again.to_toml().unwrap(), cfg.to_toml().unwrap());
    }
}

#[test]
fn empty_config_takes_the_default_preset() {
    let cfg = resolved("", "two_slit");
    assert_eq!(cfg.scenario.unwrap().name, "two_slit");
    assert_eq!(cfg.output_dir, Some(PathBuf::from("out")));
}

#[test]
fn duplicate_key_reports_its_line() {
    let e = parse_config("seed = 1\nthreads = 2\nseed = 3\n").unwrap_err();
    assert_eq!(e.line, Some(3), "{e}");
}

#[test]
fn unknown_keys_are_rejected_with_location() {
    let e = parse_config("seed = 1\n\n[collapse]\nbandd = [0.1, 0.9]\n").unwrap_err();
    assert_eq!(e.line, Some(4), "{e}");
    assert!(e.to_string().contains("bandd"), "{e}");

    let e = parse_config("[scenario]\nname = \"x\"\ncolour = 1\n").unwrap_err();
    assert_eq!(e.key.as_deref(), Some("scenario"));
    assert!(e.message.contains("colour"), "{e}");
}

#[test]
fn type_mismatch_is_rejected() {
    let e = parse_config("seed = \"seven\"\n").unwrap_err();
    assert_eq!(e.line, Some(1), "{e}");
    assert!(parse_config("threads = 0\n").is_err());
    assert!(parse_config("emit = [\"pdf\"]\n").is_err());
}

#[test]
fn unstable_timestep_is_rejected_naming_the_bound() {
    let mut cfg = resolved("", "free_gaussian");
    cfg.scenario.as_mut().unwrap().dt = 0.5;
    let text = cfg.to_toml().unwrap();
    let e = parse_config(&text).unwrap_err();
    assert!(e.message.contains("stability bound"), "{e}");
    assert_eq!(e.key.as_deref(), Some("scenario"));
    assert!(e.line.is_some());
}

#[test]
fn unknown_preset_is_rejected() {
    let e = parse_config("scenario = \"three_peak\"\n").unwrap_err();
    assert!(e.message.contains("three_peak"), "{e}");
}

#[test]
fn overrides_take_precedence() {
    let o = Overrides {
        seed: Some(11),
        output_dir: Some(PathBuf::from("elsewhere")),
        threads: Some(Threads::Fixed(3)),
    };
    let cfg =
        parse_config("seed = 1\nthreads = 2\noutput_dir = \"here\"\nscenario = \"two_peak\"\n")
            .unwrap()
            .resolve(&o, None, PathBuf::from("unused"))
            .unwrap();
    assert_eq!(cfg.seed, Some(11));
    assert_eq!(cfg.scenario.unwrap().seed, 11);
    assert_eq!(cfg.threads, Threads::Fixed(3));
    assert_eq!(cfg.output_dir, Some(PathBuf::from("elsewhere")));
}

#[test]
fn section_invariants_are_checked() {
    assert!(parse_config("[collapse]\nband = [0.9, 0.1]\n").is_err());
    assert!(parse_config("[continuum]\nladder = [100.0, 10.0]\n").is_err());
    assert!(parse_config("[rate_law]\nparticles = [0]\n").is_err());
    let cfg = parse_config("[filter]\ndrift = { kind = \"linear\", a = [[-1.0]] }\n").unwrap();
    assert_eq!(
        cfg.filter.drift,
        bmgrw::filter::DriftSpec::Linear {
            a: vec![vec![-1.0]]
        }
    );
}

mod round_trip {
    use super::*;
    use bmgrw::io::Emit;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn any_resolved_config_parses_back_to_itself(
            seed in 0u64..=i64::MAX as u64,
            threads in prop_oneof![Just(Threads::Auto), (1usize..64).prop_map(Threads::Fixed)],
            emit_mask in 0u8..16,
            preset in prop::sample::select(bmgrw::harness::presets::NAMES.to_vec()),
            band_lo in 0.001f64..0.4,
            freeze in any::<bool>(),
        ) {
            let emit: Vec<&str> = Emit::ALL
                .iter()
                .enumerate()
                .filter(|(k, _)| emit_mask & (1 << k) != 0)
                .map(|(_, e)| match e {
                    Emit::Csv => "\"csv\"",
                    Emit::Jsonl => "\"jsonl\"",
                    Emit::Snapshots => "\"snapshots\"",
                    Emit::Svg => "\"svg\"",
                })
                .collect();
            let text = format!(
                "seed = {seed}\nthreads = {}\nemit = [{}]\nscenario = \"{preset}\"\n\n[collapse]\nband = [{band_lo:?}, 0.99]\n\n[equilibrium]\nfreeze_particle = {freeze}\n",
                match threads { Threads::Auto => "\"auto\"".to_string(), Threads::Fixed(n) => n.to_string() },
                emit.join(", "),
            );
            let cfg = parse_config(&text).unwrap();
            prop_assert_eq!(cfg.seed, Some(seed));
            prop_assert_eq!(cfg.threads, threads);
            prop_assert_eq!(cfg.emit.len(), emit.len());
            let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
            prop_assert_eq!(again, cfg);
        }
    }
}

#[test]
fn documented_examples_parse() {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.md"))
        .unwrap();
    let blocks: Vec<&str> = doc
        .split("```toml\n")
        .skip(1)
        .map(|b| b.split("```").next().unwrap())
        .collect();
    assert!(blocks.len() >= 12, "{}", blocks.len());
    for block in blocks {
        if let Err(e) = parse_config(block) {
            panic!("{e}\n{block}");
        }
    }
}
