//! Nonlinear filtering of a hidden configuration `dX = F(X)dt` observed
//! through `dY = G·X dt + dB`.
//!
//! The conditional density runs on the same density scheme as the GRW
//! density SDE, driven by the innovations `dW = dY − G·⟨X⟩dt`. Two
//! independent oracles check it: a bootstrap particle filter, and the
//! Kalman–Bucy equations for linear drift.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grw::step_density_sde;
use crate::numerics::snapshot::IncrementPath;
use crate::numerics::{
    expectation_position, gaussian_increments, weighted_histogram_density, CellSampler,
    ComplexField, DensityField, Grid, SeededRng, Spectral,
};
use crate::schrodinger::{bohmian_drift, MassSpec};
use crate::transport::{DriftField, StepDiagnostics};

/// Particle filters below this effective sample size are degenerate.
pub const MIN_ESS: f64 = 10.0;
/// Resample once the effective sample size drops below this fraction of N.
pub const RESAMPLE_FRACTION: f64 = 0.5;
pub const MIN_PARTICLES: usize = 1000;

/// `dY = G·X dt + dB`, `dB ~ N(0, dt·I)`.
pub fn observe_increment(
    x: &[f64],
    coupling: &[f64],
    dt: f64,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    if x.len() != coupling.len() {
        return Err(Error::DimensionMismatch {
            expected: coupling.len(),
            got: x.len(),
        });
    }
    let db = gaussian_increments(rng, dt, x.len())?;
    Ok(db
        .iter()
        .zip(x.iter().zip(coupling))
        .map(|(b, (x, g))| g * x * dt + b)
        .collect())
}

/// `dW = dY − G·x̂ dt`.
pub fn innovations_increment(dy: &[f64], estimate: &[f64], coupling: &[f64], dt: f64) -> Vec<f64> {
    dy.iter()
        .zip(estimate.iter().zip(coupling))
        .map(|(y, (x, g))| y - g * x * dt)
        .collect()
}

/// Observation increments together with the coupling that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPath {
    pub coupling: Vec<f64>,
    pub path: IncrementPath,
}

/// Innovations with the estimates they were built from, so that
/// `dW_k = dY_k − G·x̂_k dt` can be audited.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationsPath {
    pub path: IncrementPath,
    pub estimates: Vec<Vec<f64>>,
}

impl InnovationsPath {
    pub fn new(dt: f64, dim: usize) -> Self {
        Self {
            path: IncrementPath::new(dt, dim),
            estimates: Vec::new(),
        }
    }

    /// Largest deviation of the stored increments from their definition.
    pub fn audit(&self, observations: &ObservationPath) -> f64 {
        let dt = self.path.dt;
        self.path
            .increments
            .iter()
            .zip(&observations.path.increments)
            .zip(&self.estimates)
            .flat_map(|((dw, dy), est)| {
                innovations_increment(dy, est, &observations.coupling, dt)
                    .into_iter()
                    .zip(dw.iter())
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

/// Drift of the hidden signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    /// `M⁻¹∇S` of the current wavefunction.
    Bohmian,
    /// `F(x) = A·x`.
    Linear { a: Vec<Vec<f64>> },
    /// One row-major component array per axis.
    Tabulated { components: Vec<Vec<f64>> },
}

impl DriftSpec {
    /// Drift field on `grid`; the Bohmian kind reads the guiding ψ.
    pub fn resolve(
        &self,
        grid: Grid,
        guide: Option<(&Spectral, &ComplexField, &MassSpec)>,
    ) -> Result<DriftField> {
        match self {
            DriftSpec::Bohmian => {
                let (spectral, psi, masses) = guide.ok_or_else(|| {
                    Error::InvalidParameter("a bohmian drift needs a guiding wavefunction".into())
                })?;
                bohmian_drift(spectral, psi, masses)
            }
            DriftSpec::Linear { a } => DriftField::linear(grid, a),
            DriftSpec::Tabulated { components } => DriftField::tabulated(grid, components.clone()),
        }
    }
}

/// One conditional-density step and the pre-step mean it used.
#[derive(Debug, Clone)]
pub struct FilterStep {
    pub rho: DensityField,
    pub mean_before: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

/// `dρ = −∇·(ρF)dt + ρ(x−⟨X⟩)·G·dW` with `⟨X⟩` from the pre-step density.
/// This is the GRW density step with `F` in place of `M⁻¹∇S`.
pub fn step_conditional_density(
    rho: &DensityField,
    drift: &DriftField,
    coupling: &[f64],
    dw: &[f64],
    dt: f64,
) -> Result<FilterStep> {
    let mean_before = expectation_position(rho)?;
    let (rho, diagnostics) = step_density_sde(rho, drift, coupling, &mean_before, dw, dt)?;
    Ok(FilterStep {
        rho,
        mean_before,
        diagnostics,
    })
}

/// `∫ h ρ dx` for a grid function `h`.
pub fn conditional_expectation(rho: &DensityField, h: &[f64]) -> Result<f64> {
    if h.len() != rho.values.len() {
        return Err(Error::DimensionMismatch {
            expected: rho.values.len(),
            got: h.len(),
        });
    }
    let s: f64 = rho.values.iter().zip(h).map(|(p, h)| p * h).sum();
    let v = s * rho.grid.cell_volume();
    if !v.is_finite() {
        return Err(Error::NonFiniteField);
    }
    Ok(v)
}

/// Per-axis conditional variance about the minimum-image mean.
pub fn conditional_variance(rho: &DensityField, mean: &[f64]) -> Vec<f64> {
    let grid = rho.grid;
    let offsets = crate::numerics::centered_coordinates(&grid, mean);
    (0..grid.dim)
        .map(|k| {
            rho.values
                .iter()
                .enumerate()
                .map(|(idx, p)| p * offsets[k][grid.unflatten(idx)[k]].powi(2))
                .sum::<f64>()
                * grid.cell_volume()
        })
        .collect()
}

/// Grid filter closing its own loop: the innovations use the mean of the
/// current conditional density.
#[derive(Debug, Clone)]
pub struct GridFilter {
    pub rho: DensityField,
    pub coupling: Vec<f64>,
    pub dt: f64,
    pub innovations: InnovationsPath,
}

impl GridFilter {
    pub fn new(prior: DensityField, coupling: Vec<f64>, dt: f64) -> Result<Self> {
        if coupling.len() != prior.grid.dim {
            return Err(Error::DimensionMismatch {
                expected: prior.grid.dim,
                got: coupling.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimestep(dt));
        }
        let dim = prior.grid.dim;
        Ok(Self {
            rho: prior,
            coupling,
            dt,
            innovations: InnovationsPath::new(dt, dim),
        })
    }

    /// Consume one observation increment; returns the innovation.
    pub fn step(&mut self, drift: &DriftField, dy: &[f64]) -> Result<Vec<f64>> {
        let estimate = expectation_position(&self.rho)?;
        let dw = innovations_increment(dy, &estimate, &self.coupling, self.dt);
        let next = step_conditional_density(&self.rho, drift, &self.coupling, &dw, self.dt)?;
        self.rho = next.rho;
        self.innovations.path.push(dw.clone());
        self.innovations.estimates.push(estimate);
        Ok(dw)
    }
}

/// Bootstrap particle filter with Euler-propagated particles and residual
/// resampling.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub coupling: Vec<f64>,
    grid: Grid,
    rng: SeededRng,
    pub resamples: usize,
}

impl ParticleFilter {
    pub fn new(
        prior: &DensityField,
        count: usize,
        coupling: Vec<f64>,
        rng: SeededRng,
    ) -> Result<Self> {
        if count < MIN_PARTICLES {
            return Err(Error::InvalidParameter(format!(
                "particle filter needs at least {MIN_PARTICLES} particles, got {count}"
            )));
        }
        let mut rng = rng;
        let sampler = CellSampler::new(prior)?;
        let particles = (0..count).map(|_| sampler.sample(&mut rng)).collect();
        Ok(Self {
            particles,
            weights: vec![1.0 / count as f64; count],
            coupling,
            grid: prior.grid,
            rng,
            resamples: 0,
        })
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn step(&mut self, drift: &DriftField, dy: &[f64], dt: f64) -> Result<()> {
        let grid = self.grid;
        for x in self.particles.iter_mut() {
            let f = drift.at(x);
            for (xk, fk) in x.iter_mut().zip(&f) {
                *xk = grid.wrap(*xk + dt * fk);
            }
        }
        if self.coupling.iter().any(|&g| g != 0.0) {
            let log_l: Vec<f64> = self
                .particles
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| {
                    let ll: f64 = x
                        .iter()
                        .zip(dy.iter().zip(&self.coupling))
                        .map(|(x, (y, g))| g * x * y - 0.5 * g * g * x * x * dt)
                        .sum();
                    w.ln() + ll
                })
                .collect();
            let top = log_l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (w, l) in self.weights.iter_mut().zip(&log_l) {
                *w = (l - top).exp();
                total += *w;
            }
            self.weights.iter_mut().for_each(|w| *w /= total);
        }
        let ess = self.effective_sample_size();
        if !(ess >= MIN_ESS) {
            return Err(Error::FilterDegenerate { ess });
        }
        if ess < RESAMPLE_FRACTION * self.particles.len() as f64 {
            self.resample();
        }
        Ok(())
    }

    /// Residual resampling: `⌊N wᵢ⌋` copies of each particle, the remaining
    /// slots drawn from the residual weights.
    fn resample(&mut self) {
        let n = self.particles.len();
        let mut next = Vec::with_capacity(n);
        let mut residual = Vec::with_capacity(n);
        for (x, &w) in self.particles.iter().zip(&self.weights) {
            let scaled = w * n as f64;
            let copies = scaled.floor() as usize;
            next.extend(std::iter::repeat_n(x.clone(), copies));
            residual.push(scaled - copies as f64);
        }
        let rest = n - next.len();
        if rest > 0 {
            let total: f64 = residual.iter().sum();
            let mut cdf = Vec::with_capacity(n);
            let mut acc = 0.0;
            for r in &residual {
                acc += r / total;
                cdf.push(acc);
            }
            for _ in 0..rest {
                let u = self.rng.uniform();
                let j = cdf.partition_point(|&c| c <= u).min(n - 1);
                next.push(self.particles[j].clone());
            }
        }
        self.particles = next;
        self.weights = vec![1.0 / n as f64; n];
        self.resamples += 1;
    }

    pub fn mean(&self) -> Vec<f64> {
        let dim = self.grid.dim;
        (0..dim)
            .map(|k| {
                self.particles
                    .iter()
                    .zip(&self.weights)
                    .map(|(x, w)| w * x[k])
                    .sum()
            })
            .collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        let m = self.mean();
        (0..self.grid.dim)
            .map(|k| {
                self.particles
                    .iter()
                    .zip(&self.weights)
                    .map(|(x, w)| w * (x[k] - m[k]).powi(2))
                    .sum()
            })
            .collect()
    }

    /// Weighted histogram on `bins` (any grid over the same box).
    pub fn density(&self, bins: &Grid) -> DensityField {
        weighted_histogram_density(bins, &self.particles, &self.weights)
    }
}

/// Average a density onto a coarser grid with the same extent.
pub fn coarsen(rho: &DensityField, bins: &Grid) -> Result<DensityField> {
    let grid = rho.grid;
    if bins.dim != grid.dim
        || bins.a != grid.a
        || bins.b != grid.b
        || bins.n > grid.n
        || !grid.n.is_multiple_of(bins.n)
    {
        return Err(Error::InvalidGrid(format!(
            "cannot coarsen {} points per axis onto {}",
            grid.n, bins.n
        )));
    }
    let factor = grid.n / bins.n;
    // fine node j sits at j/factor in coarse units; with an even factor the
    // cell of a node halfway between two coarse nodes straddles their common
    // boundary and is split evenly
    let axis_share: Vec<Vec<(usize, f64)>> = (0..grid.n)
        .map(|j| {
            let lo = j / factor;
            let r = j % factor;
            if factor.is_multiple_of(2) && r == factor / 2 {
                vec![(lo, 0.5), ((lo + 1) % bins.n, 0.5)]
            } else if 2 * r < factor {
                vec![(lo, 1.0)]
            } else {
                vec![((lo + 1) % bins.n, 1.0)]
            }
        })
        .collect();
    let mut out = DensityField::zeros(*bins);
    let mut coarse = [0usize; crate::numerics::MAX_DIM];
    for (idx, v) in rho.values.iter().enumerate() {
        let ix = grid.unflatten(idx);
        let combos: usize = (0..grid.dim).map(|k| axis_share[ix[k]].len()).product();
        for c in 0..combos {
            let mut rest = c;
            let mut w = *v;
            for k in 0..grid.dim {
                let shares = &axis_share[ix[k]];
                let (cell, share) = shares[rest % shares.len()];
                rest /= shares.len();
                coarse[k] = cell;
                w *= share;
            }
            out.values[bins.flatten(&coarse)] += w;
        }
    }
    let scale = grid.cell_volume() / bins.cell_volume();
    out.values.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Kalman–Bucy mean and covariance at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEstimate {
    pub t: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Kalman–Bucy filter for `dX = AX dt + dV` (`dV` with covariance `Q dt`,
/// zero for the hidden-variable model) observed through `dY = GX dt + dB`:
///
/// `dm = Am dt + PGᵀ(dY − Gm dt)`, `dP/dt = AP + PAᵀ + Q − PGᵀGP`.
///
/// The mean takes Euler–Maruyama steps; `P` takes RK4 steps.
pub fn kalman_bucy_oracle(
    a: &DMatrix<f64>,
    coupling: &[f64],
    q: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    dy: &[Vec<f64>],
    dt: f64,
) -> Result<Vec<GaussianEstimate>> {
    let d = prior_mean.len();
    if a.shape() != (d, d)
        || q.shape() != (d, d)
        || prior_cov.shape() != (d, d)
        || coupling.len() != d
    {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.nrows(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimestep(dt));
    }
    if prior_cov.clone().cholesky().is_none() {
        return Err(Error::CovarianceBlowup { t: 0.0 });
    }
    let g = DMatrix::from_diagonal(&DVector::from_column_slice(coupling));
    let gtg = &g.transpose() * &g;
    let riccati = |p: &DMatrix<f64>| a * p + p * a.transpose() + q - p * &gtg * p;
    let mut m = prior_mean.clone();
    let mut p = prior_cov.clone();
    let mut out = Vec::with_capacity(dy.len() + 1);
    out.push(GaussianEstimate {
        t: 0.0,
        mean: m.clone(),
        cov: p.clone(),
    });
    for (k, inc) in dy.iter().enumerate() {
        let y = DVector::from_column_slice(inc);
        let innovation = &y - &g * &m * dt;
        m = &m + a * &m * dt + &p * g.transpose() * innovation;
        let k1 = riccati(&p);
        let k2 = riccati(&(&p + &k1 * (0.5 * dt)));
        let k3 = riccati(&(&p + &k2 * (0.5 * dt)));
        let k4 = riccati(&(&p + &k3 * dt));
        p = &p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        p = (&p + p.transpose()) * 0.5;
        let t = (k + 1) as f64 * dt;
        if p.iter().any(|v| !v.is_finite()) || p.clone().cholesky().is_none() {
            return Err(Error::CovarianceBlowup { t });
        }
        out.push(GaussianEstimate {
            t,
            mean: m.clone(),
            cov: p.clone(),
        });
    }
    Ok(out)
}

/// Stationary variance of the scalar Riccati equation
/// `dP/dt = 2aP + q − g²P²`: the non-negative root `(a + sqrt(a² + g²q))/g²`.
pub fn scalar_riccati_fixed_point(a: f64, g: f64, q: f64) -> f64 {
    (a + (a * a + g * g * q).sqrt()) / (g * g)
}
