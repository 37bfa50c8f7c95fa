use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Complex amplitude per grid cell (a wavefunction).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

/// Real, nonnegative probability density per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Anything that can be integrated over the grid.
pub trait Integrand {
    fn grid(&self) -> &Grid;
    /// Sum of the integrand over cells, before the `h^D` weight.
    fn raw_sum(&self) -> Result<f64>;
}

impl Integrand for DensityField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn raw_sum(&self) -> Result<f64> {
        let mut s = 0.0;
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::NonFiniteField);
            }
            s += v;
        }
        Ok(s)
    }
}

/// Integrates `|ψ|²`.
impl Integrand for ComplexField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn raw_sum(&self) -> Result<f64> {
        let mut s = 0.0;
        for v in &self.values {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFiniteField);
            }
            s += v.norm_sqr();
        }
        Ok(s)
    }
}

/// Riemann sum `Σ values · h^D` over the periodic grid.
pub fn integrate<F: Integrand + ?Sized>(field: &F) -> Result<f64> {
    Ok(field.raw_sum()? * field.grid().cell_volume())
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.cells()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.cells()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// `‖ψ‖₂²`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self
            .values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
        {
            Ok(())
        } else {
            Err(Error::NonFiniteField)
        }
    }

    /// Scale to unit L2 norm; returns the norm before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        self.check_finite()?;
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroMass);
        }
        let inv = 1.0 / norm;
        self.values.iter_mut().for_each(|v| *v *= inv);
        Ok(norm)
    }

    /// Pointwise `|ψ|²` without renormalization.
    pub fn modulus_squared(&self) -> DensityField {
        DensityField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn max_modulus_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// `‖self − other‖₂`.
    pub fn l2_distance(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * self.grid.cell_volume().sqrt()
    }
}

impl DensityField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn uniform(grid: Grid) -> Self {
        let v = 1.0 / grid.length().powi(grid.dim as i32);
        Self {
            grid,
            values: vec![v; grid.cells()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cells()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescale so that `Σ values · h^D = 1`; returns the mass before scaling.
    pub fn renormalize(&mut self) -> Result<f64> {
        let mass = integrate(self)?;
        if mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let inv = 1.0 / mass;
        self.values.iter_mut().for_each(|v| *v *= inv);
        Ok(mass)
    }

    /// Set negative values to zero; returns the clipped mass `Σ|neg|·h^D`.
    pub fn clip_negative(&mut self) -> f64 {
        let mut clipped = 0.0;
        for v in &mut self.values {
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
            }
        }
        clipped * self.grid.cell_volume()
    }

    /// `∫ |self − other| dx`.
    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Marginal density of one coordinate, as a 1-D field on the same extent.
    pub fn marginal(&self, axis: usize) -> DensityField {
        let g = self.grid;
        let mut out = vec![0.0; g.n];
        for (idx, &v) in self.values.iter().enumerate() {
            out[g.unflatten(idx)[axis]] += v;
        }
        let other = g.spacing().powi(g.dim as i32 - 1);
        out.iter_mut().for_each(|v| *v *= other);
        DensityField {
            grid: g.axis_grid(),
            values: out,
        }
    }

    /// Cell masses `values · h^D`.
    pub fn cell_masses(&self) -> Vec<f64> {
        let w = self.grid.cell_volume();
        self.values.iter().map(|v| v * w).collect()
    }
}

/// Minimum resultant length below which a circular mean is rejected.
pub const MIN_RESULTANT: f64 = 0.1;

/// Circular mean of one axis, returned as a coordinate in `[a, b)`, together
/// with the resultant length.
pub fn circular_center(rho: &DensityField, axis: usize) -> (f64, f64) {
    let g = rho.grid;
    let l = g.length();
    let marginal = if g.dim == 1 {
        rho.values.clone()
    } else {
        rho.marginal(axis).values
    };
    let (mut c, mut s, mut m) = (0.0, 0.0, 0.0);
    for (j, &p) in marginal.iter().enumerate() {
        let theta = 2.0 * PI * j as f64 / g.n as f64;
        c += p * theta.cos();
        s += p * theta.sin();
        m += p;
    }
    if m <= 0.0 {
        return (g.a, 0.0);
    }
    let resultant = (c * c + s * s).sqrt() / m;
    let angle = s.atan2(c).rem_euclid(2.0 * PI);
    (g.wrap(g.a + l * angle / (2.0 * PI)), resultant)
}

/// `∫ x ρ(x) dx` per axis, using minimum-image displacements about the
/// density's circular mean.
pub fn expectation_position(rho: &DensityField) -> Result<Vec<f64>> {
    let g = rho.grid;
    let mass = integrate(rho)?;
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut out = Vec::with_capacity(g.dim);
    for axis in 0..g.dim {
        let (center, resultant) = circular_center(rho, axis);
        if resultant < MIN_RESULTANT {
            return Err(Error::DelocalizedDensity { axis, resultant });
        }
        let marginal = if g.dim == 1 {
            rho.values.clone()
        } else {
            rho.marginal(axis).values
        };
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &p) in marginal.iter().enumerate() {
            num += p * g.min_image(g.coord(j) - center);
            den += p;
        }
        out.push(center + num / den);
    }
    Ok(out)
}

/// Per-axis displacement tables `x_k − mean_k` (minimum image), one vector of
/// length `n` per axis.
pub fn centered_coordinates(grid: &Grid, mean: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dim)
        .map(|k| {
            (0..grid.n)
                .map(|j| grid.min_image(grid.coord(j) - mean[k]))
                .collect()
        })
        .collect()
}
