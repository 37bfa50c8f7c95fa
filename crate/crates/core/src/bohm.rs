//! Particle configurations moved along the guiding equation `dX/dt = M⁻¹∇S(X)`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::interp::{interpolate, CatmullRom};
use crate::numerics::{
    histogram_density, CellSampler, ComplexField, DensityField, Grid, SeededRng, Spectral,
};
use crate::schrodinger::{
    polar_amplitude, velocity_field_with, MassSpec, Propagator, VelocityField,
};

/// True configuration of a set of 1-D particles and its collapse coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub position: Vec<f64>,
    pub masses: MassSpec,
    pub g: f64,
}

impl ParticleSystem {
    pub fn new(position: Vec<f64>, masses: MassSpec, g: f64) -> Result<Self> {
        masses.validate()?;
        if position.len() != masses.dim() {
            return Err(Error::DimensionMismatch {
                expected: masses.dim(),
                got: position.len(),
            });
        }
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling g must be >= 0, got {g}"
            )));
        }
        Ok(Self {
            position,
            masses,
            g,
        })
    }

    /// Diagonal of `G = g·sqrt(mᵢ/m)`.
    pub fn coupling(&self) -> Vec<f64> {
        self.masses.coupling_matrix(self.g)
    }
}

/// Replica positions sharing one wavefunction path.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub positions: Vec<Vec<f64>>,
    pub master_seed: u64,
}

impl Ensemble {
    /// Quantum-equilibrium initialization: replica `i` is drawn from `rho`
    /// with generator `split(master_seed, i)`.
    pub fn from_density(rho: &DensityField, replicas: usize, master_seed: u64) -> Result<Self> {
        if replicas == 0 {
            return Err(Error::InvalidParameter(
                "ensemble needs at least one replica".into(),
            ));
        }
        let sampler = CellSampler::new(rho)?;
        let positions = (0..replicas)
            .into_par_iter()
            .map(|i| sampler.sample(&mut SeededRng::split(master_seed, i as u64)))
            .collect();
        Ok(Self {
            positions,
            master_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Velocity at an off-grid point (Catmull-Rom per component).
pub fn velocity_at(field: &VelocityField, x: &[f64]) -> Vec<f64> {
    field
        .components
        .iter()
        .map(|c| interpolate::<CatmullRom>(&field.grid, c, x))
        .collect()
}

/// Midpoint RK2 step given the field at the step start and at the half step.
pub fn step_particle_rk2(
    x: &[f64],
    start: &VelocityField,
    mid: &VelocityField,
    dt: f64,
) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimestep(dt));
    }
    let grid = start.grid;
    let v0 = velocity_at(start, x);
    let half: Vec<f64> = x.iter().zip(&v0).map(|(x, v)| x + 0.5 * dt * v).collect();
    let v1 = velocity_at(mid, &half);
    Ok(x.iter()
        .zip(&v1)
        .map(|(x, v)| grid.wrap(x + dt * v))
        .collect())
}

/// Midpoint RK2 step with ψ held fixed over the step.
pub fn step_particle(
    x: &[f64],
    psi: &ComplexField,
    masses: &MassSpec,
    dt: f64,
) -> Result<Vec<f64>> {
    let field = velocity_field_with(&Spectral::new(psi.grid), psi, masses)?;
    step_particle_rk2(x, &field, &field, dt)
}

/// Positions at output times, `positions[time][replica][axis]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Vec<f64>>>,
}

impl TrajectorySet {
    /// CSV with header `t,replica,x1,...,xD`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let dim = self
            .positions
            .first()
            .and_then(|p| p.first())
            .map_or(0, |x| x.len());
        let mut header = String::from("t,replica");
        for k in 1..=dim {
            header.push_str(&format!(",x{k}"));
        }
        writeln!(w, "{header}")?;
        for (t, snapshot) in self.times.iter().zip(&self.positions) {
            for (r, x) in snapshot.iter().enumerate() {
                let coords: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
                writeln!(w, "{t},{r},{}", coords.join(","))?;
            }
        }
        Ok(())
    }
}

/// Ensemble output plus `|ψ_t|²` at the same times.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub trajectories: TrajectorySet,
    pub densities: Vec<DensityField>,
}

/// Advance every replica with the same ψ path from `psi0` to `t_end`.
///
/// `half_step` must be a propagator built with `dt/2`; ψ is advanced two
/// half steps per particle step so the RK2 midpoint sees `ψ_{t+dt/2}`.
/// Output times are rounded to the nearest step.
pub fn propagate_ensemble(
    ensemble: &Ensemble,
    psi0: &ComplexField,
    half_step: &Propagator,
    masses: &MassSpec,
    t_end: f64,
    output_times: &[f64],
) -> Result<EnsembleRun> {
    let dt = 2.0 * half_step.dt();
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon {t_end} must be >= 0"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut output_steps: Vec<usize> = output_times
        .iter()
        .map(|t| (t / dt).round() as usize)
        .collect();
    output_steps.sort_unstable();
    output_steps.dedup();

    let spectral = half_step.spectral();
    let mut psi = psi0.clone();
    let mut positions = ensemble.positions.clone();
    let mut field = velocity_field_with(spectral, &psi, masses)?;
    let mut trajectories = TrajectorySet {
        times: Vec::new(),
        positions: Vec::new(),
    };
    let mut densities = Vec::new();
    let mut record = |step: usize, psi: &ComplexField, positions: &Vec<Vec<f64>>| -> Result<()> {
        trajectories.times.push(step as f64 * dt);
        trajectories.positions.push(positions.clone());
        densities.push(polar_amplitude(psi)?);
        Ok(())
    };
    let mut next_out = output_steps.iter().peekable();
    if next_out.peek() == Some(&&0) {
        record(0, &psi, &positions)?;
        next_out.next();
    }
    for step in 1..=steps {
        half_step.apply(&mut psi);
        let mid = velocity_field_with(spectral, &psi, masses)?;
        positions = positions
            .par_iter()
            .map(|x| step_particle_rk2(x, &field, &mid, dt))
            .collect::<Result<_>>()?;
        half_step.apply(&mut psi);
        field = velocity_field_with(spectral, &psi, masses)?;
        if next_out.peek() == Some(&&step) {
            record(step, &psi, &positions)?;
            next_out.next();
        }
    }
    Ok(EnsembleRun {
        trajectories,
        densities,
    })
}

/// L1 distance between the replica histogram (on the grid cells) and `rho`.
pub fn equivariance_distance(positions: &[Vec<f64>], rho: &DensityField) -> f64 {
    histogram_density(&rho.grid, positions).l1_distance(rho)
}

/// Monte Carlo floor `2·sqrt(n^D/N)` of the histogram L1 distance.
pub fn sampling_floor(grid: &Grid, samples: usize) -> f64 {
    2.0 * (grid.cells() as f64 / samples as f64).sqrt()
}
