use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{ComplexField, DensityField};
use super::grid::Grid;
use crate::error::{Error, Result};

/// FFT plans and angular wavenumbers for one grid.
///
/// All transforms are one-dimensional along an axis; multi-dimensional
/// transforms are products of axis transforms.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n;
        let dk = 2.0 * PI / grid.length();
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j < n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                m * dk
            })
            .collect();
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, forward: bool) {
        let plan = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        let n = self.grid.n;
        let stride = self.grid.stride(axis);
        if stride == 1 {
            plan.process(data);
            return;
        }
        let outer = data.len() / (n * stride);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }

    /// Multiply along one axis, in spectral space, by `multiplier[k]`.
    /// The inverse transform is normalized.
    pub fn apply_axis_multiplier(
        &self,
        data: &mut [Complex64],
        axis: usize,
        multiplier: &[Complex64],
    ) {
        let n = self.grid.n;
        let stride = self.grid.stride(axis);
        let scale = 1.0 / n as f64;
        self.transform_axis(data, axis, true);
        for (idx, v) in data.iter_mut().enumerate() {
            let k = (idx / stride) % n;
            *v *= multiplier[k] * scale;
        }
        self.transform_axis(data, axis, false);
    }

    /// Apply a separable spectral multiplier `Π_axis m_axis[k_axis]`.
    pub fn apply_separable(&self, data: &mut [Complex64], multipliers: &[Vec<Complex64>]) {
        for (axis, m) in multipliers.iter().enumerate() {
            self.apply_axis_multiplier(data, axis, m);
        }
    }

    /// Spectral coefficients of `(i k)^order`; the Nyquist mode is dropped
    /// for odd orders so real fields stay real.
    pub fn derivative_multiplier(&self, order: u32) -> Vec<Complex64> {
        let n = self.grid.n;
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if order % 2 == 1 && j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k).powu(order)
                }
            })
            .collect()
    }

    /// `∂^order/∂x_axis^order` of complex samples.
    pub fn derivative(&self, data: &[Complex64], axis: usize, order: u32) -> Vec<Complex64> {
        let mut out = data.to_vec();
        self.apply_axis_multiplier(&mut out, axis, &self.derivative_multiplier(order));
        out
    }

    /// First and second derivative along one axis, sharing one forward transform.
    pub fn first_and_second(
        &self,
        data: &[Complex64],
        axis: usize,
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n;
        let stride = self.grid.stride(axis);
        let mut spec = data.to_vec();
        self.transform_axis(&mut spec, axis, true);
        let d1m = self.derivative_multiplier(1);
        let d2m = self.derivative_multiplier(2);
        let scale = 1.0 / n as f64;
        let mut d1 = spec.clone();
        for (idx, v) in d1.iter_mut().enumerate() {
            *v *= d1m[(idx / stride) % n] * scale;
        }
        for (idx, v) in spec.iter_mut().enumerate() {
            *v *= d2m[(idx / stride) % n] * scale;
        }
        self.transform_axis(&mut d1, axis, false);
        self.transform_axis(&mut spec, axis, false);
        (d1, spec)
    }

    pub fn gradient_complex(&self, psi: &ComplexField) -> Result<Vec<ComplexField>> {
        psi.check_finite()?;
        Ok((0..self.grid.dim)
            .map(|axis| ComplexField {
                grid: self.grid,
                values: self.derivative(&psi.values, axis, 1),
            })
            .collect())
    }

    pub fn gradient_real(&self, rho: &DensityField) -> Result<Vec<DensityField>> {
        if rho.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        let data: Vec<Complex64> = rho.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok((0..self.grid.dim)
            .map(|axis| DensityField {
                grid: self.grid,
                values: self
                    .derivative(&data, axis, 1)
                    .iter()
                    .map(|c| c.re)
                    .collect(),
            })
            .collect())
    }
}

/// Field types that admit a spectral gradient.
pub trait Differentiable: Sized {
    fn spectral_gradient(&self, spectral: &Spectral) -> Result<Vec<Self>>;
    fn field_grid(&self) -> Grid;
}

impl Differentiable for ComplexField {
    fn spectral_gradient(&self, spectral: &Spectral) -> Result<Vec<Self>> {
        spectral.gradient_complex(self)
    }
    fn field_grid(&self) -> Grid {
        self.grid
    }
}

impl Differentiable for DensityField {
    fn spectral_gradient(&self, spectral: &Spectral) -> Result<Vec<Self>> {
        spectral.gradient_real(self)
    }
    fn field_grid(&self) -> Grid {
        self.grid
    }
}

/// Spectral gradient, one field per axis. Builds FFT plans on every call;
/// hot loops should hold a [`Spectral`] instead.
pub fn gradient<F: Differentiable>(field: &F) -> Result<Vec<F>> {
    field.spectral_gradient(&Spectral::new(field.field_grid()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_gradient() {
        let g = Grid::centered(2, 16, 3.0).unwrap();
        let rho = DensityField::from_fn(g, |_| 2.5);
        for d in gradient(&rho).unwrap() {
            assert!(d.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn sine_derivative() {
        let g = Grid::new(1, 64, 0.0, 3.0).unwrap();
        let w = 2.0 * PI / 3.0;
        let rho = DensityField::from_fn(g, |x| (w * x[0]).sin());
        let d = &gradient(&rho).unwrap()[0];
        for (j, v) in d.values.iter().enumerate() {
            assert!((v - w * (w * g.coord(j)).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_derivative() {
        let g = Grid::centered(1, 256, 20.0).unwrap();
        let rho = DensityField::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let d = &gradient(&rho).unwrap()[0];
        let err = d
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = g.coord(j);
                (v + x * (-x * x / 2.0).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn gradient_along_second_axis() {
        let g = Grid::centered(2, 32, PI).unwrap();
        let psi = ComplexField::from_fn(g, |x| Complex64::new(0.0, 2.0 * x[1]).exp());
        let grad = gradient(&psi).unwrap();
        for (idx, v) in grad[1].values.iter().enumerate() {
            let expected = Complex64::new(0.0, 2.0) * psi.values[idx];
            assert!((v - expected).norm() < 1e-10);
        }
        assert!(grad[0].values.iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn second_derivative_of_cosine() {
        let g = Grid::new(1, 32, 0.0, 2.0 * PI).unwrap();
        let s = Spectral::new(g);
        let data: Vec<Complex64> = (0..32)
            .map(|j| Complex64::new((3.0 * g.coord(j)).cos(), 0.0))
            .collect();
        let (_, d2) = s.first_and_second(&data, 0);
        for (j, v) in d2.iter().enumerate() {
            assert!((v.re + 9.0 * (3.0 * g.coord(j)).cos()).abs() < 1e-10);
        }
    }
}
