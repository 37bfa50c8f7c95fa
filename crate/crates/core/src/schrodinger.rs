//! Unitary evolution of ψ and the Bohmian velocity field.
//!
//! Units: ħ = 1, reference mass m = 1, so `H = −Σ (1/2mᵢ)∇ᵢ² + V`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexField, DensityField, Grid, Spectral};
use crate::transport::DriftField;

/// Time-independent potential, evaluated on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Free,
    /// `V = ½ k Σᵢ xᵢ²`.
    Harmonic {
        k: f64,
    },
    /// Wall of the given height across axis 0 (`|x₀| < width/2`), with two
    /// openings of the same width on axis 1 centred at `±slit_separation/2`.
    /// Needs `D ≥ 2`.
    DoubleSlitBarrier {
        height: f64,
        width: f64,
        slit_separation: f64,
    },
    /// Row-major values, one per grid cell.
    Tabulated {
        values: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn evaluate(&self, grid: &Grid) -> Result<Vec<f64>> {
        let values = match self {
            PotentialSpec::Free => vec![0.0; grid.cells()],
            PotentialSpec::Harmonic { k } => (0..grid.cells())
                .map(|i| 0.5 * k * grid.point(i).iter().map(|x| x * x).sum::<f64>())
                .collect(),
            PotentialSpec::DoubleSlitBarrier {
                height,
                width,
                slit_separation,
            } => {
                if grid.dim < 2 {
                    return Err(Error::InvalidParameter(
                        "double_slit_barrier needs at least two coordinates".into(),
                    ));
                }
                (0..grid.cells())
                    .map(|i| {
                        let p = grid.point(i);
                        let in_wall = p[0].abs() < 0.5 * width;
                        let in_slit = (p[1] - 0.5 * slit_separation).abs() < 0.5 * width
                            || (p[1] + 0.5 * slit_separation).abs() < 0.5 * width;
                        if in_wall && !in_slit {
                            *height
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            PotentialSpec::Tabulated { values } => {
                if values.len() != grid.cells() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.cells(),
                        got: values.len(),
                    });
                }
                values.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(values)
    }

    pub fn is_free(&self) -> bool {
        matches!(self, PotentialSpec::Free)
    }
}

/// Particle masses `mᵢ` per coordinate and the reference mass `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSpec {
    pub masses: Vec<f64>,
    #[serde(default = "one")]
    pub reference_mass: f64,
}

fn one() -> f64 {
    1.0
}

impl MassSpec {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        let spec = Self {
            masses,
            reference_mass: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(dim: usize, mass: f64) -> Self {
        Self {
            masses: vec![mass; dim],
            reference_mass: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses.is_empty() || self.masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "masses must be positive, got {:?}",
                self.masses
            )));
        }
        if !(self.reference_mass > 0.0 && self.reference_mass.is_finite()) {
            return Err(Error::InvalidParameter(
                "reference mass must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    /// Diagonal of `G = g·sqrt(M/m)`.
    pub fn coupling_matrix(&self, g: f64) -> Vec<f64> {
        self.masses
            .iter()
            .map(|m| g * (m / self.reference_mass).sqrt())
            .collect()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.dim() != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

/// Precomputed Strang split-step propagator for one `(grid, V, M, dt)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectral: Spectral,
    dt: f64,
    half_potential: Option<Vec<Complex64>>,
    kinetic: Option<Vec<Vec<Complex64>>>,
}

impl Propagator {
    /// `kinetic = false` switches the kinetic term off entirely (H = V).
    pub fn new(
        grid: Grid,
        potential: &PotentialSpec,
        masses: &MassSpec,
        dt: f64,
        kinetic: bool,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimestep(dt));
        }
        masses.validate()?;
        masses.check_grid(&grid)?;
        let spectral = Spectral::new(grid);
        let half_potential = if potential.is_free() {
            None
        } else {
            Some(
                potential
                    .evaluate(&grid)?
                    .iter()
                    .map(|v| Complex64::new(0.0, -0.5 * v * dt).exp())
                    .collect(),
            )
        };
        let kinetic = kinetic.then(|| {
            masses
                .masses
                .iter()
                .map(|m| {
                    spectral
                        .wavenumbers()
                        .iter()
                        .map(|k| Complex64::new(0.0, -k * k * dt / (2.0 * m)).exp())
                        .collect()
                })
                .collect()
        });
        Ok(Self {
            spectral,
            dt,
            half_potential,
            kinetic,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// `e^{−iV dt/2} F⁻¹ e^{−i k·M⁻¹·k dt/2} F e^{−iV dt/2}` in place.
    pub fn apply(&self, psi: &mut ComplexField) {
        self.apply_with_diagonal(psi, None);
    }

    /// As [`apply`](Self::apply), with an extra real multiplier `half_factor`
    /// folded into both potential half steps (so it acts as
    /// `half_factor²` over the whole step). Diagonal terms commute with `V`,
    /// so this remains a symmetric splitting.
    pub fn apply_with_diagonal(&self, psi: &mut ComplexField, half_factor: Option<&[f64]>) {
        let diagonal = |psi: &mut ComplexField| {
            if let Some(phase) = &self.half_potential {
                psi.values.iter_mut().zip(phase).for_each(|(v, p)| *v *= p);
            }
            if let Some(f) = half_factor {
                psi.values.iter_mut().zip(f).for_each(|(v, f)| *v *= f);
            }
        };
        diagonal(psi);
        if let Some(kin) = &self.kinetic {
            self.spectral.apply_separable(&mut psi.values, kin);
        }
        diagonal(psi);
    }

    pub fn step(&self, psi: &ComplexField) -> Result<ComplexField> {
        psi.check_finite()?;
        let mut out = psi.clone();
        self.apply(&mut out);
        Ok(out)
    }
}

/// One Strang split step of the Schrödinger equation.
pub fn step_unitary(
    psi: &ComplexField,
    potential: &PotentialSpec,
    masses: &MassSpec,
    dt: f64,
) -> Result<ComplexField> {
    Propagator::new(psi.grid, potential, masses, dt, true)?.step(psi)
}

/// Bohmian velocity `M⁻¹∇S` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

/// Relative node threshold: below `NODE_EPS · max|ψ|²` the velocity is zero.
pub const NODE_EPS: f64 = 1e-12;

/// `M⁻¹·Im(∇ψ/ψ)`, zero where `|ψ|² < 1e−12·max|ψ|²`.
pub fn velocity_field(psi: &ComplexField, masses: &MassSpec) -> Result<VelocityField> {
    velocity_field_with(&Spectral::new(psi.grid), psi, masses)
}

pub fn velocity_field_with(
    spectral: &Spectral,
    psi: &ComplexField,
    masses: &MassSpec,
) -> Result<VelocityField> {
    masses.check_grid(&psi.grid)?;
    let grad = spectral.gradient_complex(psi)?;
    let floor = NODE_EPS * psi.max_modulus_squared();
    let components = grad
        .iter()
        .zip(&masses.masses)
        .map(|(d, m)| {
            psi.values
                .iter()
                .zip(&d.values)
                .map(|(p, dp)| {
                    let r2 = p.norm_sqr();
                    if r2 < floor || r2 == 0.0 {
                        0.0
                    } else {
                        (p.conj() * dp).im / (r2 * m)
                    }
                })
                .collect()
        })
        .collect();
    Ok(VelocityField {
        grid: psi.grid,
        components,
    })
}

/// Velocity field together with its divergence, computed from ψ as
/// `∇·F = Σₖ (1/mₖ)[Im(ψ*∂ₖ²ψ)/ρ − 2 Im(ψ*∂ₖψ) Re(ψ*∂ₖψ)/ρ²]`.
pub fn bohmian_drift(
    spectral: &Spectral,
    psi: &ComplexField,
    masses: &MassSpec,
) -> Result<DriftField> {
    masses.check_grid(&psi.grid)?;
    psi.check_finite()?;
    let grid = psi.grid;
    let floor = NODE_EPS * psi.max_modulus_squared();
    let cells = grid.cells();
    let mut components = Vec::with_capacity(grid.dim);
    let mut divergence = vec![0.0; cells];
    for (axis, m) in masses.masses.iter().enumerate() {
        let (d1, d2) = spectral.first_and_second(&psi.values, axis);
        let mut comp = vec![0.0; cells];
        for i in 0..cells {
            let p = psi.values[i];
            let r2 = p.norm_sqr();
            if r2 < floor || r2 == 0.0 {
                continue;
            }
            let c1 = p.conj() * d1[i];
            let c2 = p.conj() * d2[i];
            comp[i] = c1.im / (r2 * m);
            divergence[i] += (c2.im / r2 - 2.0 * c1.im * c1.re / (r2 * r2)) / m;
        }
        components.push(comp);
    }
    Ok(DriftField {
        grid,
        components,
        divergence,
    })
}

/// `R² = |ψ|²`, renormalized to unit mass.
pub fn polar_amplitude(psi: &ComplexField) -> Result<DensityField> {
    psi.check_finite()?;
    let mut rho = psi.modulus_squared();
    rho.renormalize()?;
    Ok(rho)
}

/// Quantum potential `−(∇·M⁻¹·∇R)/(2R)` of a snapshot; zero below the node
/// threshold.
pub fn quantum_potential(psi: &ComplexField, masses: &MassSpec) -> Result<Vec<f64>> {
    masses.check_grid(&psi.grid)?;
    let spectral = Spectral::new(psi.grid);
    let amplitude: Vec<Complex64> = psi
        .values
        .iter()
        .map(|p| Complex64::new(p.norm(), 0.0))
        .collect();
    let floor = NODE_EPS * psi.max_modulus_squared();
    let mut lap = vec![0.0; psi.values.len()];
    for (axis, m) in masses.masses.iter().enumerate() {
        let d2 = spectral.derivative(&amplitude, axis, 2);
        lap.iter_mut().zip(&d2).for_each(|(l, d)| *l += d.re / m);
    }
    Ok(amplitude
        .iter()
        .zip(&lap)
        .map(|(r, l)| {
            if r.re * r.re < floor || r.re == 0.0 {
                0.0
            } else {
                -l / (2.0 * r.re)
            }
        })
        .collect())
}

/// `⟨H⟩` for a normalized ψ (kinetic part spectrally).
pub fn energy(psi: &ComplexField, potential: &PotentialSpec, masses: &MassSpec) -> Result<f64> {
    masses.check_grid(&psi.grid)?;
    let spectral = Spectral::new(psi.grid);
    let dv = psi.grid.cell_volume();
    let grad = spectral.gradient_complex(psi)?;
    let kinetic: f64 = grad
        .iter()
        .zip(&masses.masses)
        .map(|(d, m)| d.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dv / (2.0 * m))
        .sum();
    let v = potential.evaluate(&psi.grid)?;
    let pot: f64 = psi
        .values
        .iter()
        .zip(&v)
        .map(|(p, v)| p.norm_sqr() * v)
        .sum::<f64>()
        * dv;
    Ok(kinetic + pot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expectation_position;

    fn packet(grid: Grid, x0: f64, s: f64, k: f64) -> ComplexField {
        let mut psi = ComplexField::from_fn(grid, |x| {
            Complex64::new(-(x[0] - x0).powi(2) / (4.0 * s * s), k * x[0]).exp()
        });
        psi.normalize().unwrap();
        psi
    }

    fn variance(rho: &DensityField) -> f64 {
        let m = expectation_position(rho).unwrap()[0];
        let g = rho.grid;
        rho.values
            .iter()
            .enumerate()
            .map(|(j, p)| p * g.min_image(g.coord(j) - m).powi(2))
            .sum::<f64>()
            * g.spacing()
    }

    #[test]
    fn free_packet_width_law() {
        let g = Grid::centered(1, 512, 20.0).unwrap();
        let s = 1.0;
        let masses = MassSpec::uniform(1, 1.0);
        let prop = Propagator::new(g, &PotentialSpec::Free, &masses, 1e-3, true).unwrap();
        let mut psi = packet(g, 0.0, s, 0.0);
        for _ in 0..1000 {
            prop.apply(&mut psi);
        }
        let w2 = variance(&polar_amplitude(&psi).unwrap());
        let expected = s * s * (1.0 + 1.0 / (4.0 * s.powi(4)));
        assert!(
            ((w2 - expected) / expected).abs() < 1e-6,
            "{w2} vs {expected}"
        );
    }

    #[test]
    fn coherent_state_oscillates() {
        // V = ½x², ω = 1; the ground-state width is s² = 1/2
        let g = Grid::centered(1, 256, 12.0).unwrap();
        let masses = MassSpec::uniform(1, 1.0);
        let pot = PotentialSpec::Harmonic { k: 1.0 };
        let dt = 1e-3;
        let prop = Propagator::new(g, &pot, &masses, dt, true).unwrap();
        let s = 0.5f64.sqrt();
        let mut psi = packet(g, 2.0, s, 0.0);
        let steps = 1000;
        for _ in 0..steps {
            prop.apply(&mut psi);
        }
        let t = dt * steps as f64;
        let rho = polar_amplitude(&psi).unwrap();
        let center = 2.0 * t.cos();
        let exact = polar_amplitude(&packet(g, center, s, 0.0)).unwrap();
        let sup = rho
            .values
            .iter()
            .zip(&exact.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
        assert!((expectation_position(&rho).unwrap()[0] - center).abs() < 1e-6);
    }

    #[test]
    fn strang_is_second_order() {
        let g = Grid::centered(1, 128, 10.0).unwrap();
        let masses = MassSpec::uniform(1, 1.0);
        let pot = PotentialSpec::Harmonic { k: 2.0 };
        let psi0 = packet(g, 1.0, 0.6, 0.5);
        let run = |dt: f64| {
            let prop = Propagator::new(g, &pot, &masses, dt, true).unwrap();
            let mut psi = psi0.clone();
            for _ in 0..(1.0 / dt).round() as usize {
                prop.apply(&mut psi);
            }
            psi
        };
        let reference = run(1.0 / 2560.0);
        let e1 = run(0.02).l2_distance(&reference);
        let e2 = run(0.01).l2_distance(&reference);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn norm_and_energy_conserved() {
        let g = Grid::centered(1, 128, 10.0).unwrap();
        let masses = MassSpec::uniform(1, 1.0);
        let pot = PotentialSpec::Harmonic { k: 1.0 };
        let prop = Propagator::new(g, &pot, &masses, 1e-3, true).unwrap();
        let mut psi = packet(g, 1.0, 0.8, 0.3);
        let e0 = energy(&psi, &pot, &masses).unwrap();
        for _ in 0..10_000 {
            prop.apply(&mut psi);
        }
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-8);
        let e1 = energy(&psi, &pot, &masses).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} {e1}");
    }

    #[test]
    fn rejects_bad_dt() {
        let g = Grid::centered(1, 16, 1.0).unwrap();
        let psi = packet(g, 0.0, 0.3, 0.0);
        let m = MassSpec::uniform(1, 1.0);
        assert!(matches!(
            step_unitary(&psi, &PotentialSpec::Free, &m, 0.0),
            Err(Error::InvalidTimestep(_))
        ));
    }

    #[test]
    fn velocity_examples() {
        let g = Grid::new(1, 64, 0.0, 2.0 * std::f64::consts::PI).unwrap();
        let real = ComplexField::from_fn(g, |x| Complex64::new((-(x[0] - 3.0).powi(2)).exp(), 0.0));
        let v = velocity_field(&real, &MassSpec::uniform(1, 1.0)).unwrap();
        assert!(v.components[0].iter().all(|u| u.abs() < 1e-9));

        let k = 3.0;
        let plane = ComplexField::from_fn(g, |x| Complex64::new(0.0, k * x[0]).exp());
        let v1 = velocity_field(&plane, &MassSpec::uniform(1, 1.0)).unwrap();
        assert!(v1.components[0].iter().all(|u| (u - k).abs() < 1e-9));
        let v2 = velocity_field(&plane, &MassSpec::uniform(1, 2.0)).unwrap();
        assert!(v2.components[0].iter().all(|u| (u - k / 2.0).abs() < 1e-9));
    }

    #[test]
    fn velocity_ignores_global_phase() {
        let g = Grid::centered(1, 128, 10.0).unwrap();
        let psi = packet(g, 0.5, 1.0, 1.3);
        let mut rotated = psi.clone();
        let phase = Complex64::new(0.0, 0.77).exp();
        rotated.values.iter_mut().for_each(|v| *v *= phase);
        let m = MassSpec::uniform(1, 1.0);
        let a = velocity_field(&psi, &m).unwrap();
        let b = velocity_field(&rotated, &m).unwrap();
        for (x, y) in a.components[0].iter().zip(&b.components[0]) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn polar_amplitude_examples() {
        let g = Grid::centered(1, 256, 20.0).unwrap();
        let plane = ComplexField::from_fn(g, |x| {
            Complex64::new(0.0, 2.0 * std::f64::consts::PI * x[0] / 40.0).exp()
        });
        let rho = polar_amplitude(&plane).unwrap();
        assert!(rho.values.iter().all(|v| (v - 1.0 / 40.0).abs() < 1e-12));

        let s = 1.3;
        let rho = polar_amplitude(&packet(g, 0.0, s, 0.0)).unwrap();
        assert!((variance(&rho) - s * s).abs() < 1e-9);

        let mut two = packet(g, -8.0, 0.7, 0.0);
        let b = packet(g, 8.0, 0.7, 0.0);
        two.values
            .iter_mut()
            .zip(&b.values)
            .for_each(|(x, y)| *x = (*x + y) / 2f64.sqrt());
        let rho = polar_amplitude(&two).unwrap();
        let right: f64 = rho.values[128..].iter().sum::<f64>() * g.spacing();
        assert!((right - 0.5).abs() < 1e-9);
    }

    #[test]
    fn drift_divergence_matches_finite_difference() {
        let g = Grid::centered(1, 256, 12.0).unwrap();
        let m = MassSpec::uniform(1, 1.5);
        let prop = Propagator::new(g, &PotentialSpec::Free, &m, 0.01, true).unwrap();
        let mut psi = packet(g, 0.0, 0.8, 0.4);
        for _ in 0..50 {
            prop.apply(&mut psi);
        }
        let drift = bohmian_drift(prop.spectral(), &psi, &m).unwrap();
        let v = velocity_field(&psi, &m).unwrap();
        assert_eq!(drift.components, v.components);
        let h = g.spacing();
        for j in 100..156 {
            let fd = (v.components[0][j + 1] - v.components[0][j - 1]) / (2.0 * h);
            assert!((fd - drift.divergence[j]).abs() < 1e-3, "{j}");
        }
    }

    #[test]
    fn quantum_potential_of_gaussian() {
        // R ∝ exp(−x²/4s²): Q = −R''/(2mR) = (1/2m)(1/(2s²) − x²/(4s⁴))
        let g = Grid::centered(1, 256, 16.0).unwrap();
        let s = 1.0;
        let psi = packet(g, 0.0, s, 0.0);
        let q = quantum_potential(&psi, &MassSpec::uniform(1, 1.0)).unwrap();
        for j in 96..160 {
            let x = g.coord(j);
            let exact = 0.5 * (1.0 / (2.0 * s * s) - x * x / (4.0 * s.powi(4)));
            assert!((q[j] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn double_slit_needs_two_axes() {
        let g1 = Grid::centered(1, 16, 1.0).unwrap();
        let pot = PotentialSpec::DoubleSlitBarrier {
            height: 10.0,
            width: 0.5,
            slit_separation: 2.0,
        };
        assert!(pot.evaluate(&g1).is_err());
        let g2 = Grid::centered(2, 16, 4.0).unwrap();
        let v = pot.evaluate(&g2).unwrap();
        let at = |x: f64, y: f64| v[g2.flatten(&[g2.nearest_index(x), g2.nearest_index(y)])];
        assert_eq!(at(0.0, 0.0), 10.0);
        assert_eq!(at(0.0, 1.0), 0.0);
        assert_eq!(at(2.0, 0.0), 0.0);
    }
}
