use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grw::GrwDiscreteParams;
use crate::numerics::{ComplexField, Grid};
use crate::schrodinger::{MassSpec, PotentialSpec, Propagator};

/// One-axis Gaussian factor `exp{−(x−c)²/4w² + ipx}` (`w` is the standard
/// deviation of `|ψ|²`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian1d {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

impl Gaussian1d {
    fn amplitude(&self, grid: &Grid, x: f64) -> Complex64 {
        let d = grid.min_image(x - self.center);
        Complex64::new(-d * d / (4.0 * self.width * self.width), self.momentum * d).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Isotropic Gaussian packet.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        momentum: Vec<f64>,
    },
    /// `√p0·φ(x + d/2) + √(1−p0)·φ(x − d/2)`, displaced along every axis
    /// (a bulk superposition when `D > 1`); both packets at rest.
    TwoGaussian {
        p0: f64,
        separation: f64,
        width: f64,
    },
    ProductOfGaussians {
        factors: Vec<Gaussian1d>,
    },
}

impl InitialState {
    pub fn build(&self, grid: &Grid) -> Result<ComplexField> {
        let dim = grid.dim;
        let mismatch = |got: usize| Error::DimensionMismatch { expected: dim, got };
        let product = |factors: &[Gaussian1d]| -> ComplexField {
            ComplexField::from_fn(*grid, |x| {
                factors
                    .iter()
                    .zip(x)
                    .map(|(f, &xk)| f.amplitude(grid, xk))
                    .product()
            })
        };
        let mut psi = match self {
            InitialState::Gaussian {
                center,
                width,
                momentum,
            } => {
                if center.len() != dim {
                    return Err(mismatch(center.len()));
                }
                if momentum.len() != dim {
                    return Err(mismatch(momentum.len()));
                }
                positive("width", *width)?;
                let factors: Vec<Gaussian1d> = center
                    .iter()
                    .zip(momentum)
                    .map(|(&c, &p)| Gaussian1d {
                        center: c,
                        width: *width,
                        momentum: p,
                    })
                    .collect();
                product(&factors)
            }
            InitialState::TwoGaussian {
                p0,
                separation,
                width,
            } => {
                if !(0.0..=1.0).contains(p0) {
                    return Err(Error::InvalidParameter(format!("p0 = {p0} outside [0, 1]")));
                }
                positive("width", *width)?;
                let side = |c: f64| {
                    let f = Gaussian1d {
                        center: c,
                        width: *width,
                        momentum: 0.0,
                    };
                    let mut phi = product(&vec![f; dim]);
                    phi.normalize().map(|_| phi)
                };
                let a = side(-0.5 * separation)?;
                let b = side(0.5 * separation)?;
                let (ca, cb) = (p0.sqrt(), (1.0 - p0).sqrt());
                ComplexField::from_values(
                    *grid,
                    a.values
                        .iter()
                        .zip(&b.values)
                        .map(|(x, y)| x * ca + y * cb)
                        .collect(),
                )?
            }
            InitialState::ProductOfGaussians { factors } => {
                if factors.len() != dim {
                    return Err(mismatch(factors.len()));
                }
                for f in factors {
                    positive("width", f.width)?;
                }
                product(factors)
            }
        };
        psi.normalize()?;
        Ok(psi)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be > 0, got {v}"
        )))
    }
}

fn default_sigma() -> f64 {
    1.0
}

/// Collapse parameters: `g` drives the continuous model, `(lambda, sigma)`
/// the discrete one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrwSettings {
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl Default for GrwSettings {
    fn default() -> Self {
        Self {
            g: 0.0,
            lambda: 0.0,
            sigma: default_sigma(),
        }
    }
}

impl GrwSettings {
    pub fn discrete(&self) -> Result<GrwDiscreteParams> {
        GrwDiscreteParams::new(self.lambda, self.sigma)
    }
}

fn free() -> PotentialSpec {
    PotentialSpec::Free
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub grid: Grid,
    #[serde(default = "free")]
    pub potential: PotentialSpec,
    pub masses: MassSpec,
    pub initial: InitialState,
    #[serde(default)]
    pub grw: GrwSettings,
    /// `false` switches the kinetic term off (`H = V`).
    #[serde(default = "yes")]
    pub kinetic: bool,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    pub seed: u64,
    pub replicas: usize,
}

impl ScenarioSpec {
    /// Heuristic splitting bound `h²·min(mᵢ)/π`.
    pub fn stability_bound(&self) -> f64 {
        let min_mass = self
            .masses
            .masses
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        self.grid.spacing().powi(2) * min_mass / std::f64::consts::PI
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.masses.validate()?;
        if self.masses.dim() != self.grid.dim {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim,
                got: self.masses.dim(),
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidTimestep(self.dt));
        }
        if self.kinetic && self.dt > self.stability_bound() {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds the stability bound h²·min(m)/π = {:.6e}",
                self.dt,
                self.stability_bound()
            )));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        if let Some(t) = self
            .output_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.horizon + 0.5 * self.dt))
        {
            return Err(Error::InvalidParameter(format!(
                "output time {t} outside [0, {}]",
                self.horizon
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be >= 1".into()));
        }
        if !(self.grw.g >= 0.0 && self.grw.g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "g must be >= 0, got {}",
                self.grw.g
            )));
        }
        self.grw.discrete()?;
        self.potential.evaluate(&self.grid)?;
        self.initial.build(&self.grid)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Step indices of the output times, sorted and deduplicated.
    pub fn output_steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .output_times
            .iter()
            .map(|t| (t / self.dt).round() as usize)
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn coupling(&self) -> Vec<f64> {
        self.masses.coupling_matrix(self.grw.g)
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(
            self.grid,
            &self.potential,
            &self.masses,
            self.dt,
            self.kinetic,
        )
    }

    pub fn psi0(&self) -> Result<ComplexField> {
        self.initial.build(&self.grid)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }
}

/// Named scenarios used by the experiments and the command line.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 6] = [
        "free_gaussian",
        "two_slit",
        "two_peak",
        "continuum",
        "linear_filter",
        "equilibrium",
    ];

    pub fn by_name(name: &str) -> Result<ScenarioSpec> {
        Ok(match name {
            "free_gaussian" => free_gaussian(),
            "two_slit" => two_slit(),
            "two_peak" => two_peak(),
            "continuum" => continuum(),
            "linear_filter" => linear_filter(),
            "equilibrium" => equilibrium(),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown scenario preset {name:?}; known presets: {}",
                    NAMES.join(", ")
                )))
            }
        })
    }

    /// Moving free packet under continuous collapse, `g = 1`.
    pub fn free_gaussian() -> ScenarioSpec {
        ScenarioSpec {
            name: "free_gaussian".into(),
            grid: Grid {
                dim: 1,
                n: 256,
                a: -10.0,
                b: 10.0,
            },
            potential: PotentialSpec::Free,
            masses: MassSpec::uniform(1, 1.0),
            initial: InitialState::Gaussian {
                center: vec![-0.5],
                width: 1.0,
                momentum: vec![1.0],
            },
            grw: GrwSettings {
                g: 1.0,
                ..GrwSettings::default()
            },
            kinetic: true,
            horizon: 1.0,
            dt: 1e-3,
            output_times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            seed: 7,
            replicas: 1,
        }
    }

    /// Two interfering packets, no collapse.
    pub fn two_slit() -> ScenarioSpec {
        ScenarioSpec {
            name: "two_slit".into(),
            grid: Grid {
                dim: 1,
                n: 256,
                a: -16.0,
                b: 16.0,
            },
            potential: PotentialSpec::Free,
            masses: MassSpec::uniform(1, 1.0),
            initial: InitialState::TwoGaussian {
                p0: 0.5,
                separation: 5.0,
                width: 1.0,
            },
            grw: GrwSettings::default(),
            kinetic: true,
            horizon: 2.0,
            dt: 1e-3,
            output_times: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            seed: 11,
            replicas: 10_000,
        }
    }

    /// Two narrow packets with `H = 0`: `g·d = 8` for the continuous model,
    /// `d/σ = 2` at `λ = 2` for the discrete one.
    pub fn two_peak() -> ScenarioSpec {
        ScenarioSpec {
            name: "two_peak".into(),
            grid: Grid {
                dim: 1,
                n: 256,
                a: -8.0,
                b: 8.0,
            },
            potential: PotentialSpec::Free,
            masses: MassSpec::uniform(1, 1.0),
            initial: InitialState::TwoGaussian {
                p0: 0.7,
                separation: 4.0,
                width: 0.3,
            },
            grw: GrwSettings {
                g: 2.0,
                lambda: 2.0,
                sigma: 2.0,
            },
            kinetic: false,
            horizon: 5.0,
            dt: 1e-3,
            output_times: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            seed: 3,
            replicas: 2000,
        }
    }

    /// Two-site state for the fast-path continuum limit: `g·d = 4`, read out
    /// at `t = horizon`.
    pub fn continuum() -> ScenarioSpec {
        ScenarioSpec {
            name: "continuum".into(),
            grw: GrwSettings {
                g: 1.0,
                ..GrwSettings::default()
            },
            horizon: 0.125,
            output_times: vec![0.0, 0.125],
            seed: 13,
            replicas: 100_000,
            ..two_peak()
        }
    }

    /// Observed packet with the drift supplied separately (linear filter runs).
    pub fn linear_filter() -> ScenarioSpec {
        ScenarioSpec {
            name: "linear_filter".into(),
            grid: Grid {
                dim: 1,
                n: 1024,
                a: -8.0,
                b: 8.0,
            },
            potential: PotentialSpec::Free,
            masses: MassSpec::uniform(1, 1.0),
            initial: InitialState::Gaussian {
                center: vec![1.0],
                width: 1.0,
                momentum: vec![0.0],
            },
            grw: GrwSettings {
                g: 1.0,
                ..GrwSettings::default()
            },
            kinetic: false,
            horizon: 2.0,
            dt: 1e-3,
            output_times: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            seed: 19,
            replicas: 1,
        }
    }

    /// Replicated co-simulation for the equilibrium and innovations checks.
    pub fn equilibrium() -> ScenarioSpec {
        ScenarioSpec {
            name: "equilibrium".into(),
            output_times: vec![0.0, 0.5, 1.0],
            seed: 23,
            replicas: 500,
            ..free_gaussian()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    #[test]
    fn presets_validate() {
        for name in presets::NAMES {
            presets::by_name(name).unwrap().validate().unwrap();
        }
        assert!(presets::by_name("nope").is_err());
    }

    #[test]
    fn stability_bound_is_enforced() {
        let mut s = presets::free_gaussian();
        s.dt = 2.0 * s.stability_bound();
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("stability bound"), "{msg}");
        s.kinetic = false;
        s.validate().unwrap();
    }

    #[test]
    fn two_gaussian_weights() {
        let g = Grid::centered(1, 256, 8.0).unwrap();
        let psi = InitialState::TwoGaussian {
            p0: 0.7,
            separation: 4.0,
            width: 0.3,
        }
        .build(&g)
        .unwrap();
        let rho = psi.modulus_squared();
        let left: f64 = rho.values[..128].iter().sum::<f64>() * g.spacing();
        assert!((left - 0.7).abs() < 1e-9);
        assert!((integrate(&rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hash_tracks_content() {
        let a = presets::free_gaussian();
        let b = a.with_dt(5e-4);
        assert_eq!(a.hash(), presets::free_gaussian().hash());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let mut s = presets::free_gaussian();
        s.initial = InitialState::Gaussian {
            center: vec![0.0, 0.0],
            width: 1.0,
            momentum: vec![0.0],
        };
        assert!(s.validate().is_err());
    }
}
