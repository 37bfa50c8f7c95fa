//! The TOML run configuration and its resolution into concrete settings.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bmgrw::filter::DriftSpec;
use bmgrw::harness::{presets, EquivalenceOptions, InitialState, ScenarioSpec};
use bmgrw::io::Emit;
use serde::{Deserialize, Serialize};
use toml::Spanned;

/// A rejected config: what was wrong, and where when that is known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}", self.render())]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            line,
            message: message.into(),
        }
    }

    fn render(&self) -> String {
        let mut s = String::from("config error");
        if let Some(line) = self.line {
            s.push_str(&format!(" at line {line}"));
        }
        if let Some(key) = &self.key {
            s.push_str(&format!(" in `{key}`"));
        }
        format!("{s}: {}", self.message)
    }

    fn from_toml(text: &str, e: &toml::de::Error) -> Self {
        let span = e.span();
        // the offending key, when the span is a short single-line token
        let key = span
            .clone()
            .and_then(|r| text.get(r))
            .map(str::trim)
            .filter(|k| !k.is_empty() && k.len() <= 64 && !k.contains('\n'))
            .map(str::to_string);
        Self {
            key,
            line: span.map(|r| line_of(text, r.start)),
            message: e.message().trim().to_string(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Worker count: a fixed number or rayon's choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "ThreadsRepr", into = "ThreadsRepr")]
pub enum Threads {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThreadsRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<ThreadsRepr> for Threads {
    type Error = String;

    fn try_from(r: ThreadsRepr) -> Result<Self, String> {
        match r {
            ThreadsRepr::Count(0) => Err("threads must be >= 1 or \"auto\"".into()),
            ThreadsRepr::Count(n) => Ok(Threads::Fixed(n)),
            ThreadsRepr::Word(w) if w == "auto" => Ok(Threads::Auto),
            ThreadsRepr::Word(w) => Err(format!(
                "threads must be a positive integer or \"auto\", got {w:?}"
            )),
        }
    }
}

impl From<Threads> for ThreadsRepr {
    fn from(t: Threads) -> Self {
        match t {
            Threads::Auto => ThreadsRepr::Word("auto".into()),
            Threads::Fixed(n) => ThreadsRepr::Count(n),
        }
    }
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        let n: usize = s
            .parse()
            .map_err(|_| format!("expected a positive integer or \"auto\", got {s:?}"))?;
        Threads::try_from(ThreadsRepr::Count(n))
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Auto => f.write_str("auto"),
            Threads::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub drift: DriftSpec,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            drift: DriftSpec::Bohmian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseSection {
    /// A replica has collapsed once peak A's weight leaves `(lo, hi)`.
    pub band: [f64; 2],
}

impl Default for CollapseSection {
    fn default() -> Self {
        let b = bmgrw::harness::collapse::DEFAULT_BAND;
        Self { band: [b.lo, b.hi] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceSection {
    /// Also run at `dt/2` on the same Brownian path and check the error drops.
    pub convergence: bool,
    pub l1_tolerance: f64,
    /// Start ρ from this state instead of `|ψ₀|²`.
    pub mismatched_prior: Option<InitialState>,
}

impl Default for EquivalenceSection {
    fn default() -> Self {
        Self {
            convergence: true,
            l1_tolerance: EquivalenceOptions::default().l1_tolerance,
            mismatched_prior: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSection {
    pub freeze_particle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuumSection {
    /// Hit rates λ of the discrete models, in increasing order.
    pub ladder: Vec<f64>,
    pub mis_scale: f64,
    /// Also run the rate-law study configured in `[rate_law]`.
    pub rate_law: bool,
}

impl Default for ContinuumSection {
    fn default() -> Self {
        let d = bmgrw::harness::ContinuumOptions::default();
        Self {
            ladder: d.ladder,
            mis_scale: d.mis_scale,
            rate_law: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateLawSection {
    pub lambda: f64,
    pub masses: [f64; 2],
    pub horizon: f64,
    pub runs: usize,
    pub particles: Vec<usize>,
    pub amplification_runs: usize,
    pub seed: u64,
}

impl Default for RateLawSection {
    fn default() -> Self {
        let d = bmgrw::harness::RateLawOptions::default();
        Self {
            lambda: d.lambda,
            masses: d.masses,
            horizon: d.horizon,
            runs: d.runs,
            particles: d.particles,
            amplification_runs: d.amplification_runs,
            seed: d.seed,
        }
    }
}

impl RateLawSection {
    pub fn options(&self) -> bmgrw::harness::RateLawOptions {
        bmgrw::harness::RateLawOptions {
            lambda: self.lambda,
            masses: self.masses,
            horizon: self.horizon,
            runs: self.runs,
            particles: self.particles.clone(),
            amplification_runs: self.amplification_runs,
            seed: self.seed,
        }
    }
}

/// As written by the user: `scenario` is a preset name or a full table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(default)]
    threads: Threads,
    emit: Option<BTreeSet<Emit>>,
    scenario: Option<Spanned<toml::Value>>,
    #[serde(default)]
    filter: FilterSection,
    #[serde(default)]
    collapse: CollapseSection,
    #[serde(default)]
    equivalence: EquivalenceSection,
    #[serde(default)]
    equilibrium: EquilibriumSection,
    #[serde(default)]
    continuum: ContinuumSection,
    #[serde(default)]
    rate_law: RateLawSection,
}

/// A validated configuration. Serializing it gives the `resolved_config`
/// echo, which parses back to the same value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    /// Master seed; equal to `scenario.seed` once resolved.
    pub seed: Option<u64>,
    pub threads: Threads,
    pub emit: BTreeSet<Emit>,
    pub scenario: Option<ScenarioSpec>,
    pub filter: FilterSection,
    pub collapse: CollapseSection,
    pub equivalence: EquivalenceSection,
    pub equilibrium: EquilibriumSection,
    pub continuum: ContinuumSection,
    pub rate_law: RateLawSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<Threads>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::from_toml(text, &e))?;
    let scenario = match raw.scenario {
        None => None,
        Some(spanned) => {
            let line = Some(line_of(text, spanned.span().start));
            let spec = match spanned.into_inner() {
                toml::Value::String(name) => presets::by_name(&name)
                    .map_err(|e| ConfigError::new("scenario", line, e.to_string()))?,
                value @ toml::Value::Table(_) => ScenarioSpec::deserialize(value).map_err(|e| {
                    ConfigError::new("scenario", line, e.message().trim().to_string())
                })?,
                other => {
                    return Err(ConfigError::new(
                        "scenario",
                        line,
                        format!(
                            "expected a preset name or a table, found {}",
                            other.type_str()
                        ),
                    ))
                }
            };
            Some((spec, line))
        }
    };
    let mut cfg = RunConfig {
        output_dir: raw.output_dir,
        seed: raw.seed,
        threads: raw.threads,
        emit: raw.emit.unwrap_or_else(|| Emit::ALL.into_iter().collect()),
        scenario: None,
        filter: raw.filter,
        collapse: raw.collapse,
        equivalence: raw.equivalence,
        equilibrium: raw.equilibrium,
        continuum: raw.continuum,
        rate_law: raw.rate_law,
    };
    if let Some((spec, line)) = scenario {
        cfg.set_scenario(spec, line)?;
    }
    cfg.validate_sections()?;
    Ok(cfg)
}

impl RunConfig {
    /// Install `spec`, reconcile the seeds, and validate.
    fn set_scenario(
        &mut self,
        mut spec: ScenarioSpec,
        line: Option<usize>,
    ) -> Result<(), ConfigError> {
        match self.seed {
            Some(seed) => spec.seed = seed,
            None => self.seed = Some(spec.seed),
        }
        spec.validate()
            .map_err(|e| ConfigError::new("scenario", line, e.to_string()))?;
        self.scenario = Some(spec);
        Ok(())
    }

    fn validate_sections(&self) -> Result<(), ConfigError> {
        let [lo, hi] = self.collapse.band;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(ConfigError::new(
                "collapse.band",
                None,
                format!("need 0 < lo < hi < 1, got [{lo}, {hi}]"),
            ));
        }
        if !(self.equivalence.l1_tolerance > 0.0) {
            return Err(ConfigError::new(
                "equivalence.l1_tolerance",
                None,
                "must be > 0",
            ));
        }
        let ladder = &self.continuum.ladder;
        if ladder.is_empty()
            || ladder.iter().any(|l| !(*l > 0.0))
            || ladder.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(ConfigError::new(
                "continuum.ladder",
                None,
                "need a nonempty, strictly increasing list of positive rates",
            ));
        }
        if !(self.continuum.mis_scale > 0.0) {
            return Err(ConfigError::new("continuum.mis_scale", None, "must be > 0"));
        }
        let r = &self.rate_law;
        if !(r.lambda > 0.0 && r.horizon > 0.0) || r.masses.iter().any(|m| !(*m > 0.0)) {
            return Err(ConfigError::new(
                "rate_law",
                None,
                "lambda, horizon and masses must be > 0",
            ));
        }
        if r.runs == 0
            || r.amplification_runs == 0
            || r.particles.is_empty()
            || r.particles.contains(&0)
        {
            return Err(ConfigError::new(
                "rate_law",
                None,
                "runs, amplification_runs and particle counts must be >= 1",
            ));
        }
        Ok(())
    }

    /// Apply command-line overrides, then fill the scenario from
    /// `default_preset` and the output directory from `default_out` when the
    /// file left them out.
    pub fn resolve(
        mut self,
        overrides: &Overrides,
        default_preset: Option<&str>,
        default_out: PathBuf,
    ) -> Result<Self, ConfigError> {
        if let Some(t) = overrides.threads {
            self.threads = t;
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = Some(dir.clone());
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(default_out);
        }
        if let Some(seed) = overrides.seed {
            self.seed = Some(seed);
        }
        let spec = match (self.scenario.take(), default_preset) {
            (Some(s), _) => Some(s),
            (None, Some(name)) => Some(
                presets::by_name(name)
                    .map_err(|e| ConfigError::new("scenario", None, e.to_string()))?,
            ),
            (None, None) => None,
        };
        if let Some(spec) = spec {
            self.set_scenario(spec, None)?;
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError {
            key: None,
            line: None,
            message: format!("cannot serialize the resolved config: {e}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threads_parse() {
        assert_eq!("auto".parse::<Threads>(), Ok(Threads::Auto));
        assert_eq!("4".parse::<Threads>(), Ok(Threads::Fixed(4)));
        assert!("0".parse::<Threads>().is_err());
        assert!("many".parse::<Threads>().is_err());
    }

    #[test]
    fn top_level_seed_wins_over_the_preset() {
        let cfg = parse_config("seed = 99\nscenario = \"two_peak\"\n").unwrap();
        assert_eq!(cfg.scenario.unwrap().seed, 99);
    }

    #[test]
    fn preset_seed_is_materialized() {
        let cfg = parse_config("scenario = \"two_peak\"\n").unwrap();
        assert_eq!(cfg.seed, Some(presets::two_peak().seed));
    }
}
