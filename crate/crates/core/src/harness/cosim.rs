//! One replica of the hybrid co-simulation: the true configuration `X`, its
//! observation `Y`, the innovations `W`, the wavefunction ψ and the
//! conditional density ρ, advanced together.

use crate::bohm::step_particle_rk2;
use crate::error::Result;
use crate::filter::{innovations_increment, step_conditional_density};
use crate::grw::step_grw_continuous;
use crate::numerics::{
    expectation_position, gaussian_increments, CellSampler, ComplexField, DensityField, SeededRng,
};
use crate::schrodinger::{bohmian_drift, polar_amplitude, MassSpec, Propagator, VelocityField};
use crate::transport::DriftField;

/// Sub-stream purposes under `substream(seed, replica, purpose)`.
pub mod stream {
    pub const INITIAL_POSITION: u64 = 0;
    pub const OBSERVATION_NOISE: u64 = 1;
    pub const HITS: u64 = 2;
    pub const PARTICLE_FILTER: u64 = 3;
    /// Fresh Brownian increments for uncoupled collapse runs.
    pub const COLLAPSE_NOISE: u64 = 4;
}

#[derive(Debug, Clone)]
pub struct CoSimulation<'a> {
    propagator: &'a Propagator,
    masses: &'a MassSpec,
    coupling: Vec<f64>,
    pub psi: ComplexField,
    pub rho: DensityField,
    pub x: Vec<f64>,
    pub steps_taken: usize,
    noise: SeededRng,
    substeps: u32,
    freeze_particle: bool,
}

/// What one step consumed and produced.
#[derive(Debug, Clone)]
pub struct CoStep {
    pub dy: Vec<f64>,
    /// The innovation fed to both ψ and ρ.
    pub dw: Vec<f64>,
    /// `⟨x⟩` of `ψ_t`, used to form `dw`.
    pub mean_psi: Vec<f64>,
    /// Drift built from `ψ_t`, used for ρ and for `X`.
    pub drift: DriftField,
}

impl<'a> CoSimulation<'a> {
    /// `X₀ ~ |ψ₀|²`; `rho0 = None` starts the filter in equilibrium.
    /// `substeps` splits each observation-noise increment into that many
    /// finer draws, so runs at `dt` and `dt/substeps` share one Brownian
    /// path.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        propagator: &'a Propagator,
        masses: &'a MassSpec,
        coupling: Vec<f64>,
        psi0: ComplexField,
        rho0: Option<DensityField>,
        seed: u64,
        replica: u64,
        substeps: u32,
    ) -> Result<Self> {
        let born = polar_amplitude(&psi0)?;
        let mut init = SeededRng::substream(seed, replica, stream::INITIAL_POSITION);
        let x = CellSampler::new(&born)?.sample(&mut init);
        Ok(Self {
            propagator,
            masses,
            coupling,
            psi: psi0,
            rho: rho0.unwrap_or(born),
            x,
            steps_taken: 0,
            noise: SeededRng::substream(seed, replica, stream::OBSERVATION_NOISE),
            substeps: substeps.max(1),
            freeze_particle: false,
        })
    }

    /// Hold `X` fixed (a deliberately broken model).
    pub fn freeze_particle(mut self, freeze: bool) -> Self {
        self.freeze_particle = freeze;
        self
    }

    pub fn dt(&self) -> f64 {
        self.propagator.dt()
    }

    pub fn time(&self) -> f64 {
        self.steps_taken as f64 * self.dt()
    }

    pub fn step(&mut self) -> Result<CoStep> {
        let dt = self.dt();
        let dim = self.x.len();
        let drift = bohmian_drift(self.propagator.spectral(), &self.psi, self.masses)?;

        let fine = dt / self.substeps as f64;
        let mut db = vec![0.0; dim];
        for _ in 0..self.substeps {
            for (b, inc) in db
                .iter_mut()
                .zip(gaussian_increments(&mut self.noise, fine, dim)?)
            {
                *b += inc;
            }
        }
        let dy: Vec<f64> = db
            .iter()
            .zip(self.x.iter().zip(&self.coupling))
            .map(|(b, (x, g))| g * x * dt + b)
            .collect();

        let mean_psi = expectation_position(&polar_amplitude(&self.psi)?)?;
        let dw = innovations_increment(&dy, &mean_psi, &self.coupling, dt);

        self.psi = step_grw_continuous(&self.psi, self.propagator, &self.coupling, &dw)?;
        self.rho = step_conditional_density(&self.rho, &drift, &self.coupling, &dw, dt)?.rho;
        if !self.freeze_particle {
            let v = VelocityField {
                grid: drift.grid,
                components: drift.components.clone(),
            };
            self.x = step_particle_rk2(&self.x, &v, &v, dt)?;
        }
        self.steps_taken += 1;
        Ok(CoStep {
            dy,
            dw,
            mean_psi,
            drift,
        })
    }

    /// `L1(|ψ|², ρ)`.
    pub fn l1(&self) -> Result<f64> {
        Ok(polar_amplitude(&self.psi)?.l1_distance(&self.rho))
    }
}

/// `CDF_ρ(x)` along axis 0 of a 1-D density: cell masses summed from the
/// lower cell edge `a − h/2`, linear inside the cell containing `x`.
pub fn density_cdf(rho: &DensityField, x: f64) -> f64 {
    let grid = rho.grid;
    let h = grid.spacing();
    let lower = grid.a - 0.5 * h;
    let s = (x - lower).rem_euclid(grid.length()) / h;
    let j = (s.floor() as usize).min(grid.n - 1);
    let below: f64 = rho.values[..j].iter().sum::<f64>() * h;
    let total: f64 = rho.values.iter().sum::<f64>() * h;
    ((below + rho.values[j] * h * (s - j as f64)) / total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Grid;

    #[test]
    fn cdf_of_uniform_is_linear() {
        let g = Grid::centered(1, 64, 4.0).unwrap();
        let rho = DensityField::uniform(g);
        let h = g.spacing();
        assert!((density_cdf(&rho, -4.0 - 0.5 * h + 1e-12)).abs() < 1e-9);
        assert!((density_cdf(&rho, 0.0 - 0.5 * h) - 0.5).abs() < 1e-12);
        assert!((density_cdf(&rho, 2.0 - 0.5 * h) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn substeps_share_the_brownian_path() {
        use crate::schrodinger::PotentialSpec;
        use num_complex::Complex64;
        let g = Grid::centered(1, 64, 8.0).unwrap();
        let m = MassSpec::uniform(1, 1.0);
        let mut psi = ComplexField::from_fn(g, |x| Complex64::new(-x[0] * x[0] / 4.0, 0.0).exp());
        psi.normalize().unwrap();
        let coarse = Propagator::new(g, &PotentialSpec::Free, &m, 0.02, true).unwrap();
        let fine = Propagator::new(g, &PotentialSpec::Free, &m, 0.01, true).unwrap();
        let mut a = CoSimulation::new(&coarse, &m, vec![0.0], psi.clone(), None, 1, 0, 2).unwrap();
        let mut b = CoSimulation::new(&fine, &m, vec![0.0], psi, None, 1, 0, 1).unwrap();
        assert_eq!(a.x, b.x);
        let da = a.step().unwrap().dy[0];
        let db = b.step().unwrap().dy[0] + b.step().unwrap().dy[0];
        assert!((da - db).abs() < 1e-15);
    }
}
