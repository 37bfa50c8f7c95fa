//! The shared density scheme behind both the GRW density SDE and the
//! conditional forward equation:
//!
//! `dρ = −∇·(ρF) dt + ρ (x − ⟨x⟩)·G·dW`
//!
//! Transport is semi-Lagrangian with the drift frozen over the step
//! (midpoint back-trajectory, six-point Lagrange interpolation, trapezoidal
//! Jacobian), followed by the exact multiplicative factor
//! `exp{(x−⟨x⟩)·G·dW − ½(x−⟨x⟩)·G²·(x−⟨x⟩)dt}`, negative clipping and
//! renormalization.

use crate::error::{Error, Result};
use crate::numerics::interp::{interpolate, Lagrange6};
use crate::numerics::{centered_coordinates, DensityField, Grid, Spectral};

/// Clipped negative mass allowed in a single step.
pub const MAX_CLIP_MASS: f64 = 1e-4;

/// Drift `F(x)` sampled on the grid, with its divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
    pub divergence: Vec<f64>,
}

impl DriftField {
    pub fn zero(grid: Grid) -> Self {
        Self {
            grid,
            components: vec![vec![0.0; grid.cells()]; grid.dim],
            divergence: vec![0.0; grid.cells()],
        }
    }

    /// `F(x) = A·x` in box coordinates; `∇·F = tr A`.
    pub fn linear(grid: Grid, a: &[Vec<f64>]) -> Result<Self> {
        if a.len() != grid.dim || a.iter().any(|row| row.len() != grid.dim) {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                got: a.len(),
            });
        }
        let cells = grid.cells();
        let mut components = vec![vec![0.0; cells]; grid.dim];
        for idx in 0..cells {
            let p = grid.point(idx);
            for (k, row) in a.iter().enumerate() {
                components[k][idx] = row.iter().zip(&p).map(|(a, x)| a * x).sum();
            }
        }
        let trace: f64 = (0..grid.dim).map(|k| a[k][k]).sum();
        Ok(Self {
            grid,
            components,
            divergence: vec![trace; cells],
        })
    }

    /// Tabulated components; the divergence is taken spectrally.
    pub fn tabulated(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                got: components.len(),
            });
        }
        let spectral = Spectral::new(grid);
        let mut divergence = vec![0.0; grid.cells()];
        for (axis, comp) in components.iter().enumerate() {
            if comp.len() != grid.cells() {
                return Err(Error::DimensionMismatch {
                    expected: grid.cells(),
                    got: comp.len(),
                });
            }
            if comp.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteField);
            }
            let data: Vec<_> = comp
                .iter()
                .map(|&v| num_complex::Complex64::new(v, 0.0))
                .collect();
            let d = spectral.derivative(&data, axis, 1);
            divergence.iter_mut().zip(&d).for_each(|(s, v)| *s += v.re);
        }
        Ok(Self {
            grid,
            components,
            divergence,
        })
    }

    /// Drift at an off-grid point.
    pub fn at(&self, point: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| interpolate::<Lagrange6>(&self.grid, c, point))
            .collect()
    }
}

/// Semi-Lagrangian transport of `rho` over `dt` under the frozen drift.
pub fn advect(rho: &DensityField, drift: &DriftField, dt: f64) -> Result<DensityField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimestep(dt));
    }
    let grid = rho.grid;
    let dim = grid.dim;
    let cells = grid.cells();
    let mut out = vec![0.0; cells];
    let mut node = vec![0.0; dim];
    let mut mid = vec![0.0; dim];
    let mut dep = vec![0.0; dim];
    for (idx, slot) in out.iter_mut().enumerate() {
        let ix = grid.unflatten(idx);
        for k in 0..dim {
            node[k] = grid.coord(ix[k]);
            mid[k] = node[k] - 0.5 * dt * drift.components[k][idx];
        }
        for k in 0..dim {
            let f = interpolate::<Lagrange6>(&grid, &drift.components[k], &mid);
            dep[k] = node[k] - dt * f;
        }
        let div_dep = interpolate::<Lagrange6>(&grid, &drift.divergence, &dep);
        let jac = (-0.5 * dt * (drift.divergence[idx] + div_dep)).exp();
        *slot = interpolate::<Lagrange6>(&grid, &rho.values, &dep) * jac;
    }
    Ok(DensityField { grid, values: out })
}

/// Per-cell collapse exponent `E = (x−⟨x⟩)·G·dW − ½(x−⟨x⟩)·G²·(x−⟨x⟩)dt`.
///
/// The density factor is `e^E`; the wavefunction factor is `e^{E/2}`.
pub fn collapse_exponent(
    grid: &Grid,
    coupling: &[f64],
    mean: &[f64],
    dw: &[f64],
    dt: f64,
) -> Vec<f64> {
    let offsets = centered_coordinates(grid, mean);
    let per_axis: Vec<Vec<f64>> = offsets
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let gk = coupling[k];
            d.iter()
                .map(|x| gk * x * dw[k] - 0.5 * gk * gk * x * x * dt)
                .collect()
        })
        .collect();
    if grid.dim == 1 {
        return per_axis.into_iter().next().unwrap();
    }
    (0..grid.cells())
        .map(|idx| {
            let ix = grid.unflatten(idx);
            (0..grid.dim).map(|k| per_axis[k][ix[k]]).sum()
        })
        .collect()
}

/// Bookkeeping of one density step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// Negative mass removed by clipping.
    pub clipped_mass: f64,
    /// Mass after transport and multiplication, before renormalization.
    pub mass_before_renormalization: f64,
}

/// One step of `dρ = −∇·(ρF)dt + ρ(x−⟨x⟩)·G·dW`; `mean` is `⟨x⟩` of the
/// pre-step density.
pub fn density_step(
    rho: &DensityField,
    drift: &DriftField,
    coupling: &[f64],
    mean: &[f64],
    dw: &[f64],
    dt: f64,
) -> Result<(DensityField, StepDiagnostics)> {
    let grid = rho.grid;
    for len in [coupling.len(), mean.len(), dw.len()] {
        if len != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                got: len,
            });
        }
    }
    let mut next = advect(rho, drift, dt)?;
    let clipped = next.clip_negative();
    let mut log_scale = 0.0;
    if coupling.iter().any(|&g| g != 0.0) {
        let e = collapse_exponent(&grid, coupling, mean, dw, dt);
        // the common factor e^{max E} cancels on renormalization
        log_scale = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (v, x) in next.values.iter_mut().zip(&e) {
            *v *= (x - log_scale).exp();
        }
    }
    let mass = next.renormalize()? * log_scale.exp();
    if clipped > MAX_CLIP_MASS {
        return Err(Error::ClipMassExceeded { mass: clipped });
    }
    if next.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteField);
    }
    Ok((
        next,
        StepDiagnostics {
            clipped_mass: clipped,
            mass_before_renormalization: mass,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid, mu: f64, sd: f64) -> DensityField {
        let mut rho =
            DensityField::from_fn(grid, |x| (-(x[0] - mu).powi(2) / (2.0 * sd * sd)).exp());
        rho.renormalize().unwrap();
        rho
    }

    #[test]
    fn constant_drift_translates() {
        let g = Grid::centered(1, 256, 16.0).unwrap();
        let rho = gaussian(g, 0.0, 1.0);
        let drift = DriftField::tabulated(g, vec![vec![0.7; 256]]).unwrap();
        let mut r = rho.clone();
        for _ in 0..100 {
            r = advect(&r, &drift, 0.01).unwrap();
        }
        let exact = gaussian(g, 0.7, 1.0);
        assert!(r.l1_distance(&exact) < 1e-5, "{}", r.l1_distance(&exact));
    }

    #[test]
    fn linear_contraction_keeps_gaussian() {
        // F = −x: variance decays as e^{−2t}
        let g = Grid::centered(1, 512, 8.0).unwrap();
        let drift = DriftField::linear(g, &[vec![-1.0]]).unwrap();
        let mut r = gaussian(g, 1.0, 1.0);
        for _ in 0..500 {
            r = advect(&r, &drift, 1e-3).unwrap();
        }
        let sd = (-0.5f64).exp();
        let exact = gaussian(g, (-0.5f64).exp(), sd);
        assert!(r.l1_distance(&exact) < 1e-5, "{}", r.l1_distance(&exact));
        assert!((r.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_density_single_collapse_step() {
        let g = Grid::centered(1, 128, 4.0).unwrap();
        let rho = DensityField::uniform(g);
        let drift = DriftField::zero(g);
        let mean = [0.0];
        let (up, _) = density_step(&rho, &drift, &[1.0], &mean, &[0.2], 0.01).unwrap();
        let (down, _) = density_step(&rho, &drift, &[1.0], &mean, &[-0.2], 0.01).unwrap();
        let m = |r: &DensityField| -> f64 {
            r.values
                .iter()
                .enumerate()
                .map(|(j, p)| p * g.coord(j))
                .sum::<f64>()
                * g.spacing()
        };
        assert!(m(&up) > 0.0 && m(&down) < 0.0);
        // closed form: ρ' ∝ exp(x·dW − ½x²dt)
        let mut exact = DensityField::from_fn(g, |x| (x[0] * 0.2 - 0.5 * x[0] * x[0] * 0.01).exp());
        exact.renormalize().unwrap();
        assert!(up.l1_distance(&exact) < 1e-12);
    }

    #[test]
    fn renormalized_after_random_kicks() {
        let g = Grid::centered(1, 128, 10.0).unwrap();
        let drift = DriftField::zero(g);
        let mut rho = gaussian(g, 0.5, 1.0);
        let mut rng = crate::numerics::SeededRng::new(8);
        for _ in 0..200 {
            let mean = crate::numerics::expectation_position(&rho).unwrap();
            let dw = crate::numerics::gaussian_increments(&mut rng, 0.01, 1).unwrap();
            rho = density_step(&rho, &drift, &[1.5], &mean, &dw, 0.01)
                .unwrap()
                .0;
            assert!((crate::numerics::integrate(&rho).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_dimensional_exponent_is_separable() {
        let g = Grid::centered(2, 16, 4.0).unwrap();
        let e = collapse_exponent(&g, &[1.0, 2.0], &[0.5, -0.5], &[0.1, -0.3], 0.01);
        let idx = g.flatten(&[3, 11]);
        let (x, y) = (g.coord(3) - 0.5, g.coord(11) + 0.5);
        let exact = x * 0.1 - 0.5 * x * x * 0.01 + 2.0 * y * -0.3 - 0.5 * 4.0 * y * y * 0.01;
        assert!((e[idx] - exact).abs() < 1e-12);
    }
}
