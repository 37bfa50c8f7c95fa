use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bmgrw::grw::peaks::ExitBand;
use bmgrw::harness::verify::HALVING_IMPROVEMENT;
use bmgrw::harness::{
    run_bohm, run_collapse_statistics, run_continuum_limit, run_equilibrium_under_collapse,
    run_equivalence, run_equivalence_convergence, run_filter, run_grw_continuous, run_grw_discrete,
    run_rate_law, run_schrodinger, run_suite, Artifacts, Assertion, ContinuumOptions,
    CriterionOutcome, EquilibriumOptions, EquivalenceOptions, Mode, RunOutput, RunReport,
};
use bmgrw::io::{write_run, Emit};
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{parse_config, ConfigError, Overrides, RunConfig, Threads};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitStatus {
    Success = 0,
    /// Usage, config, I/O or runtime error.
    Error = 1,
    AssertionFailure = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Unitary evolution only.
    Schrodinger,
    /// Bohmian trajectories sampled from |ψ0|².
    Bohm,
    /// Discrete GRW hits on one replica.
    GrwDiscrete,
    /// Continuous collapse on one replica.
    GrwContinuous,
    /// Grid filter on a hidden signal.
    Filter,
    /// |ψ|² against the filter density under shared innovations.
    Equivalence,
    /// Born-rule collapse statistics over replicas.
    CollapseStats,
    /// Equilibrium and innovations audit under collapse.
    Equilibrium,
    /// Discrete-to-continuous limit and the rate law.
    ContinuumLimit,
    /// The acceptance suite.
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Schrodinger => "schrodinger",
            Command::Bohm => "bohm",
            Command::GrwDiscrete => "grw-discrete",
            Command::GrwContinuous => "grw-continuous",
            Command::Filter => "filter",
            Command::Equivalence => "equivalence",
            Command::CollapseStats => "collapse-stats",
            Command::Equilibrium => "equilibrium",
            Command::ContinuumLimit => "continuum-limit",
            Command::VerifyAll => "verify-all",
        }
    }

    /// Scenario used when the config names none.
    pub fn default_preset(self) -> Option<&'static str> {
        match self {
            Command::Schrodinger | Command::Equivalence => Some("free_gaussian"),
            Command::Bohm => Some("two_slit"),
            Command::GrwDiscrete | Command::GrwContinuous | Command::CollapseStats => {
                Some("two_peak")
            }
            Command::Filter => Some("linear_filter"),
            Command::Equilibrium => Some("equilibrium"),
            Command::ContinuumLimit => Some("continuum"),
            Command::VerifyAll => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bmgrw",
    version,
    about = "Bohmian mechanics with GRW collapse, and the filter behind it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration (see docs/config.md).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads: a positive integer or `auto`.
    #[arg(long, global = true, value_name = "N|auto")]
    threads: Option<Threads>,
    /// Reduced problem sizes (verify-all only).
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] bmgrw::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Run(_) => "run",
            CliError::Io(_) => "io",
        }
    }

    fn json(&self) -> serde_json::Value {
        let mut v = json!({"status": "error", "kind": self.kind(), "message": self.to_string()});
        if let CliError::Config(c) = self {
            v["key"] = json!(c.key);
            v["line"] = json!(c.line);
        }
        v
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn dispatch<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                eprintln!(
                    "{}",
                    json!({"status": "error", "kind": "usage", "message": e.kind().to_string()})
                );
                ExitStatus::Error
            } else {
                ExitStatus::Success
            };
        }
    };
    match run(&cli) {
        Ok(failures) if failures.is_empty() => ExitStatus::Success,
        Ok(failures) => {
            eprintln!(
                "{}",
                json!({"status": "assertion_failure", "command": cli.command.name(), "failed": failures})
            );
            ExitStatus::AssertionFailure
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.json());
            ExitStatus::Error
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let base = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => parse_config("")?,
    };
    let overrides = Overrides {
        seed: cli.seed,
        output_dir: cli.out.clone(),
        threads: cli.threads,
    };
    let default_out = Path::new("runs").join(cli.command.name());
    Ok(base.resolve(&overrides, cli.command.default_preset(), default_out)?)
}

/// Failed assertions, one JSON object each.
type Failures = Vec<serde_json::Value>;

fn run(cli: &Cli) -> Result<Failures, CliError> {
    if cli.quick && cli.command != Command::VerifyAll {
        return Err(CliError::Usage("--quick applies to verify-all only".into()));
    }
    let cfg = load(cli)?;
    let out = cfg.output_dir.clone().expect("resolved");
    fs::create_dir_all(&out)?;
    fs::write(out.join("resolved_config"), cfg.to_toml()?)?;

    let threads = match cfg.threads {
        Threads::Auto => 0,
        Threads::Fixed(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    let start = Instant::now();
    let emit: Vec<Emit> = cfg.emit.iter().copied().collect();
    let (failures, timing) = pool.install(|| -> Result<_, CliError> {
        if cli.command == Command::VerifyAll {
            let mode = if cli.quick { Mode::Quick } else { Mode::Full };
            let outcomes = run_suite(mode, cfg.seed);
            write_suite(&out, &outcomes, &emit)
        } else {
            let outputs = experiment(cli.command, &cfg)?;
            let mut failures = Failures::new();
            for (sub, output) in &outputs {
                write_run(&out.join(sub), output, &emit)?;
                println!(
                    "{} {} report {}",
                    output.report.experiment,
                    if output.report.passed { "PASS" } else { "FAIL" },
                    output.report.hash()
                );
                failures.extend(failed(&output.report));
            }
            Ok((failures, json!({})))
        }
    })?;
    let mut timing = timing;
    timing["command"] = json!(cli.command.name());
    timing["threads"] = json!(pool.current_num_threads());
    timing["wall_clock_s"] = json!(start.elapsed().as_secs_f64());
    fs::write(
        out.join("timing.json"),
        serde_json::to_string_pretty(&timing).expect("json"),
    )?;
    Ok(failures)
}

fn failed(report: &RunReport) -> impl Iterator<Item = serde_json::Value> + '_ {
    report
        .failures()
        .map(|a| assertion_json(&report.experiment, a))
}

fn assertion_json(scope: &str, a: &Assertion) -> serde_json::Value {
    json!({"report": scope, "name": a.name, "measured": a.measured, "relation": a.relation, "tolerance": a.tolerance})
}

/// Run one experiment subcommand; each output goes to its own subdirectory
/// (`""` is the output directory itself).
fn experiment(command: Command, cfg: &RunConfig) -> Result<Vec<(PathBuf, RunOutput)>, CliError> {
    let s = cfg
        .scenario
        .as_ref()
        .expect("experiments resolve a scenario");
    let root = PathBuf::new;
    Ok(match command {
        Command::Schrodinger => vec![(root(), run_schrodinger(s)?)],
        Command::Bohm => vec![(root(), run_bohm(s)?)],
        Command::GrwDiscrete => vec![(root(), run_grw_discrete(s)?)],
        Command::GrwContinuous => vec![(root(), run_grw_continuous(s)?)],
        Command::Filter => vec![(root(), run_filter(s, &cfg.filter.drift)?)],
        Command::Equivalence => {
            let e = &cfg.equivalence;
            let options = EquivalenceOptions {
                l1_tolerance: e.l1_tolerance,
                mismatched_prior: e.mismatched_prior.clone(),
                ..EquivalenceOptions::default()
            };
            if e.convergence {
                let study = run_equivalence_convergence(s, &options)?;
                let mut coarse = study.coarse;
                coarse
                    .report
                    .scalar("dt_halving_improvement", study.improvement);
                coarse.report.check(Assertion::at_least(
                    "max L1 at dt / max L1 at dt/2",
                    study.improvement,
                    HALVING_IMPROVEMENT,
                ));
                vec![(root(), coarse), (PathBuf::from("fine"), study.fine)]
            } else {
                vec![(root(), run_equivalence(s, &options)?)]
            }
        }
        Command::CollapseStats => {
            let [lo, hi] = cfg.collapse.band;
            vec![(root(), run_collapse_statistics(s, ExitBand { lo, hi })?)]
        }
        Command::Equilibrium => {
            let options = EquilibriumOptions {
                freeze_particle: cfg.equilibrium.freeze_particle,
            };
            vec![(root(), run_equilibrium_under_collapse(s, options)?)]
        }
        Command::ContinuumLimit => {
            let c = &cfg.continuum;
            let options = ContinuumOptions {
                ladder: c.ladder.clone(),
                mis_scale: c.mis_scale,
            };
            let mut v = vec![(root(), run_continuum_limit(s, &options)?)];
            if c.rate_law {
                v.push((
                    PathBuf::from("rate_law"),
                    run_rate_law(&cfg.rate_law.options())?,
                ));
            }
            v
        }
        Command::VerifyAll => unreachable!("handled by the caller"),
    })
}

/// `summary.json`, then one directory per criterion holding its reports.
fn write_suite(
    out: &Path,
    outcomes: &[CriterionOutcome],
    emit: &[Emit],
) -> Result<(Failures, serde_json::Value), CliError> {
    let mut failures = Failures::new();
    let mut summary = Vec::new();
    let mut timing = Vec::new();
    for o in outcomes {
        println!("{}", o.summary());
        let dir = out.join(format!("criterion_{:02}", o.id));
        for (k, report) in o.reports.iter().enumerate() {
            let output = RunOutput {
                report: report.clone(),
                artifacts: Artifacts::default(),
            };
            write_run(
                &dir.join(format!("{k}_{}", report.experiment)),
                &output,
                emit,
            )?;
        }
        let scope = format!("criterion {}", o.id);
        failures.extend(
            o.assertions
                .iter()
                .filter(|a| !a.passed)
                .map(|a| assertion_json(&scope, a)),
        );
        if let Some(e) = &o.error {
            failures.push(json!({"report": scope, "error": e}));
        }
        summary.push(json!({
            "id": o.id,
            "title": o.title,
            "passed": o.passed,
            "error": o.error,
            "reports_sha256": o.reports_hash(),
            "assertions": o.assertions,
        }));
        timing.push(json!({"id": o.id, "wall_clock_s": o.elapsed.as_secs_f64()}));
    }
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("json"),
    )?;
    Ok((failures, json!({ "criteria": timing })))
}
