//! GRW collapse, in both forms: Gaussian localization hits at Poisson times,
//! and the continuum-limit stochastic Schrödinger equation
//!
//! `dψ = −iHψdt − ⅛(x−⟨x⟩)·G²·(x−⟨x⟩)ψdt + ½(x−⟨x⟩)·G·ψdW`.

pub mod peaks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{expectation_position, CellSampler, ComplexField, DensityField, SeededRng};
use crate::schrodinger::{polar_amplitude, MassSpec, Propagator};
use crate::transport::{self, collapse_exponent, DriftField, StepDiagnostics};

/// Post-hit squared norm below which the state counts as annihilated.
pub const ANNIHILATION_NORM_SQR: f64 = 1e-300;
/// Largest allowed probability of two hits inside one step.
pub const MAX_DOUBLE_HIT_PROBABILITY: f64 = 1e-4;

/// Physical defaults, per reference mass. See [`GrwDiscreteParams::physical`]
/// for the conversion to simulation units.
pub const PHYSICAL_LAMBDA_PER_SECOND: f64 = 1e-17;
pub const PHYSICAL_SIGMA_METRES: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrwDiscreteParams {
    /// Hit rate per reference mass.
    pub lambda: f64,
    /// Localization width.
    pub sigma: f64,
}

impl GrwDiscreteParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        let p = Self { lambda, sigma };
        p.validate()?;
        Ok(p)
    }

    /// The physical defaults in simulation units, where one unit of length is
    /// `length_unit_m` metres and one unit of time is `time_unit_s` seconds.
    pub fn physical(length_unit_m: f64, time_unit_s: f64) -> Result<Self> {
        Self::new(
            PHYSICAL_LAMBDA_PER_SECOND * time_unit_s,
            PHYSICAL_SIGMA_METRES / length_unit_m,
        )
    }

    /// Parameters on the continuum-limit curve `2λ/σ² = g²`.
    pub fn on_continuum_curve(lambda: f64, g: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling g must be > 0, got {g}"
            )));
        }
        Self::new(lambda, (2.0 * lambda).sqrt() / g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// `λᵢ = (mᵢ/m)λ`.
    pub fn rates(&self, masses: &MassSpec) -> Vec<f64> {
        masses
            .masses
            .iter()
            .map(|m| m / masses.reference_mass * self.lambda)
            .collect()
    }

    /// `g = sqrt(2λ)/σ`.
    pub fn continuum_coupling(&self) -> f64 {
        (2.0 * self.lambda).sqrt() / self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrwContinuousParams {
    pub g: f64,
    /// Diagonal of `G`.
    pub coupling: Vec<f64>,
}

impl GrwContinuousParams {
    pub fn new(g: f64, masses: &MassSpec) -> Result<Self> {
        masses.validate()?;
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling g must be >= 0, got {g}"
            )));
        }
        Ok(Self {
            g,
            coupling: masses.coupling_matrix(g),
        })
    }

    pub fn from_discrete(params: &GrwDiscreteParams, masses: &MassSpec) -> Result<Self> {
        Self::new(params.continuum_coupling(), masses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitEvent {
    pub t: f64,
    pub i: usize,
    pub z: f64,
}

/// Multiply ψ by `exp{−(xᵢ−z)²/2σ²}` (minimum image) and renormalize.
pub fn localization_apply(
    psi: &ComplexField,
    i: usize,
    z: f64,
    sigma: f64,
) -> Result<ComplexField> {
    let grid = psi.grid;
    if i >= grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: i + 1,
        });
    }
    let profile: Vec<f64> = grid
        .axis_coords()
        .iter()
        .map(|x| {
            let d = grid.min_image(x - z);
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut out = psi.clone();
    for (idx, v) in out.values.iter_mut().enumerate() {
        *v *= profile[grid.unflatten(idx)[i]];
    }
    let norm_sqr = out.norm_sqr();
    if !(norm_sqr >= ANNIHILATION_NORM_SQR) {
        return Err(Error::AnnihilatedState {
            norm: norm_sqr.sqrt(),
        });
    }
    out.normalize()?;
    Ok(out)
}

/// Merged hit times in `(t0, t1]` of independent Poisson processes with the
/// given rates, sorted by `(time, particle)`.
pub fn sample_hit_schedule(
    rates: &[f64],
    t0: f64,
    t1: f64,
    rng: &mut SeededRng,
) -> Vec<(f64, usize)> {
    let mut hits = Vec::new();
    for (i, &rate) in rates.iter().enumerate() {
        if rate <= 0.0 {
            continue;
        }
        let mut t = t0;
        loop {
            t += rng.exponential(rate);
            if t > t1 {
                break;
            }
            hits.push((t, i));
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits
}

/// Density of the hit centre for coordinate `i`, on the nodes of that axis:
/// `∝ ∫ |ψ|² exp{−(xᵢ−z)²/σ²}`, normalized over the box.
pub fn hit_center_density(psi: &ComplexField, i: usize, sigma: f64) -> Result<DensityField> {
    let grid = psi.grid;
    if i >= grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: i + 1,
        });
    }
    let marginal = psi.modulus_squared().marginal(i);
    let axis = marginal.grid;
    let nodes = axis.axis_coords();
    let values = nodes
        .iter()
        .map(|&z| {
            marginal
                .values
                .iter()
                .zip(&nodes)
                .map(|(p, &x)| {
                    let d = axis.min_image(x - z);
                    p * (-d * d / (sigma * sigma)).exp()
                })
                .sum()
        })
        .collect();
    let mut density = DensityField { grid: axis, values };
    density.renormalize()?;
    Ok(density)
}

pub fn sample_hit_center(
    psi: &ComplexField,
    i: usize,
    sigma: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let density = hit_center_density(psi, i, sigma)?;
    Ok(CellSampler::new(&density)?.sample(rng)[0])
}

/// Unitary step over `propagator.dt()`, then every hit scheduled in
/// `(t, t+dt]` in time order.
pub fn step_grw_discrete(
    psi: &ComplexField,
    propagator: &Propagator,
    rates: &[f64],
    sigma: f64,
    t: f64,
    rng: &mut SeededRng,
) -> Result<(ComplexField, Vec<HitEvent>)> {
    let dt = propagator.dt();
    let total: f64 = rates.iter().sum();
    let mu = total * dt;
    let double_hit = 1.0 - (-mu).exp() * (1.0 + mu);
    if double_hit > MAX_DOUBLE_HIT_PROBABILITY {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} gives two-hit probability {double_hit:.2e} > {MAX_DOUBLE_HIT_PROBABILITY:e}"
        )));
    }
    let mut out = propagator.step(psi)?;
    let mut events = Vec::new();
    for (th, i) in sample_hit_schedule(rates, t, t + dt, rng) {
        let z = sample_hit_center(&out, i, sigma, rng)?;
        out = localization_apply(&out, i, z, sigma)?;
        events.push(HitEvent { t: th, i, z });
    }
    Ok((out, events))
}

/// One continuous-collapse step with the squared norm it had before
/// renormalization.
#[derive(Debug, Clone)]
pub struct ContinuousStep {
    pub psi: ComplexField,
    pub norm_sqr_before: f64,
}

/// Strang step of the linear form: `e^{E/4}` is folded into both potential
/// half steps, where `E = (x−⟨x⟩)·G·dW − ½(x−⟨x⟩)·G²·(x−⟨x⟩)dt` uses the
/// pre-step mean. Then renormalize.
///
/// The factor `e^{E/2}` carries the Itô correction `−¼…dt`, so `|ψ|²`
/// receives exactly the density factor `e^E`.
pub fn step_grw_continuous_with_norm(
    psi: &ComplexField,
    propagator: &Propagator,
    coupling: &[f64],
    dw: &[f64],
) -> Result<ContinuousStep> {
    let grid = psi.grid;
    for len in [coupling.len(), dw.len()] {
        if len != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                got: len,
            });
        }
    }
    if coupling.iter().all(|&g| g == 0.0) {
        return Ok(ContinuousStep {
            psi: propagator.step(psi)?,
            norm_sqr_before: 1.0,
        });
    }
    psi.check_finite()?;
    let dt = propagator.dt();
    let mean = expectation_position(&polar_amplitude(psi)?)?;
    let e = collapse_exponent(&grid, coupling, &mean, dw, dt);
    let shift = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half: Vec<f64> = e.iter().map(|x| (0.25 * (x - shift)).exp()).collect();
    let mut out = psi.clone();
    propagator.apply_with_diagonal(&mut out, Some(&half));
    let norm_sqr = out.norm_sqr();
    if !(norm_sqr >= ANNIHILATION_NORM_SQR) {
        return Err(Error::AnnihilatedState {
            norm: norm_sqr.sqrt(),
        });
    }
    out.normalize()?;
    Ok(ContinuousStep {
        psi: out,
        norm_sqr_before: norm_sqr * shift.exp(),
    })
}

/// With `G = 0` this is exactly `propagator.step`, the unitary step.
pub fn step_grw_continuous(
    psi: &ComplexField,
    propagator: &Propagator,
    coupling: &[f64],
    dw: &[f64],
) -> Result<ComplexField> {
    Ok(step_grw_continuous_with_norm(psi, propagator, coupling, dw)?.psi)
}

/// `dρ = −∇·(ρM⁻¹∇S)dt + ρ(x−⟨x⟩)·G·dW`, on the shared density scheme.
pub fn step_density_sde(
    rho: &DensityField,
    velocity: &DriftField,
    coupling: &[f64],
    mean: &[f64],
    dw: &[f64],
    dt: f64,
) -> Result<(DensityField, StepDiagnostics)> {
    transport::density_step(rho, velocity, coupling, mean, dw, dt)
}

/// `𝓜ᵢ(x) = mᵢ ∫ δ(xᵢ−x)|ψ|²`, on the axis grid.
pub fn matter_density(psi: &ComplexField, i: usize, masses: &MassSpec) -> Result<DensityField> {
    if i >= psi.grid.dim || masses.dim() != psi.grid.dim {
        return Err(Error::DimensionMismatch {
            expected: psi.grid.dim,
            got: masses.dim().max(i + 1),
        });
    }
    let mut m = psi.modulus_squared().marginal(i);
    let mi = masses.masses[i];
    m.values.iter_mut().for_each(|v| *v *= mi);
    Ok(m)
}

#[cfg(test)]
mod tests;
