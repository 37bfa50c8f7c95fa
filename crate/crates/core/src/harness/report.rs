use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bohm::TrajectorySet;
use crate::numerics::snapshot::IncrementPath;
use crate::numerics::{ComplexField, DensityField, RNG_ALGORITHM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// A checked claim: the measured value, the bound it was held to, and the
/// outcome. NaN never passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            relation: Relation::AtMost,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            relation: Relation::AtLeast,
            tolerance,
            passed: measured >= tolerance,
        }
    }

    /// A yes/no check, recorded as `1 ≥ 1` or `0 ≥ 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    /// `|measured − target| ≤ tolerance`.
    pub fn within(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self::at_most(name, (measured - target).abs(), tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

/// How every generator of a run was derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub master: u64,
    pub algorithm: String,
    pub streams: BTreeMap<String, String>,
}

impl SeedManifest {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            algorithm: RNG_ALGORITHM.to_string(),
            streams: BTreeMap::new(),
        }
    }

    pub fn stream(mut self, name: &str, derivation: &str) -> Self {
        self.streams
            .insert(name.to_string(), derivation.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seeds: SeedManifest,
    pub scalars: BTreeMap<String, f64>,
    pub metrics: Vec<MetricSeries>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    /// Kept out of the serialized report so that reruns are bit-identical.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn new(
        experiment: &str,
        scenario: &str,
        scenario_hash: String,
        seeds: SeedManifest,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            scenario: scenario.to_string(),
            scenario_hash,
            seeds,
            scalars: BTreeMap::new(),
            metrics: Vec::new(),
            assertions: Vec::new(),
            passed: true,
            wall_clock_s: 0.0,
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.to_string(), value);
    }

    pub fn series(&mut self, name: &str, t: Vec<f64>, values: Vec<f64>) {
        self.metrics.push(MetricSeries {
            name: name.to_string(),
            t,
            values,
        });
    }

    pub fn check(&mut self, a: Assertion) {
        self.passed &= a.passed;
        self.assertions.push(a);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// SHA-256 of the serialized report.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[derive(Debug, Clone)]
pub enum Snapshot {
    Density { t: f64, field: DensityField },
    Complex { t: f64, field: ComplexField },
}

/// Everything a run produces besides its report.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    /// One JSON object per line of `events.jsonl`.
    pub events: Vec<serde_json::Value>,
    pub snapshots: Vec<(String, Snapshot)>,
    pub paths: Vec<(String, IncrementPath)>,
    pub trajectories: Option<TrajectorySet>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Artifacts,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_both_ways() {
        assert!(!Assertion::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Assertion::at_least("x", f64::NAN, 1.0).passed);
        assert!(Assertion::holds("y", true).passed);
        assert!(!Assertion::holds("y", false).passed);
        assert!(Assertion::within("z", 0.69, 0.7, 0.031).passed);
    }

    #[test]
    fn wall_clock_is_not_hashed() {
        let mut a = RunReport::new("e", "s", "h".into(), SeedManifest::new(1));
        a.check(Assertion::at_most("x", 0.5, 1.0));
        let mut b = a.clone();
        b.wall_clock_s = 12.0;
        assert_eq!(a.hash(), b.hash());
        b.scalar("k", 1.0);
        assert_ne!(a.hash(), b.hash());
        a.check(Assertion::at_most("y", 2.0, 1.0));
        assert!(!a.passed);
        assert_eq!(a.failures().count(), 1);
    }
}
