//! Grid, fields, spectral calculus, interpolation, quadrature, and seeded
//! sampling shared by every other module.

mod field;
mod grid;
pub mod interp;
mod rng;
pub mod snapshot;
mod spectral;
pub mod stats;

pub use field::{
    centered_coordinates, circular_center, expectation_position, integrate, ComplexField,
    DensityField, Integrand, MIN_RESULTANT,
};
pub use grid::{Grid, MAX_CELLS, MAX_DIM};
pub use rng::{gaussian_increments, sample_point, CellSampler, SeededRng, RNG_ALGORITHM};
pub use spectral::{gradient, Differentiable, Spectral};

/// Histogram of points on the grid cells, normalized as a density.
pub fn histogram_density(grid: &Grid, points: &[Vec<f64>]) -> DensityField {
    let mut rho = DensityField::zeros(*grid);
    if points.is_empty() {
        return rho;
    }
    let w = 1.0 / (points.len() as f64 * grid.cell_volume());
    for p in points {
        rho.values[grid.cell_of(p)] += w;
    }
    rho
}

/// Weighted histogram; weights need not be normalized.
pub fn weighted_histogram_density(
    grid: &Grid,
    points: &[Vec<f64>],
    weights: &[f64],
) -> DensityField {
    let mut rho = DensityField::zeros(*grid);
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rho;
    }
    let scale = 1.0 / (total * grid.cell_volume());
    for (p, &w) in points.iter().zip(weights) {
        rho.values[grid.cell_of(p)] += w * scale;
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
            let g = Grid::centered(1, 64, 3.0).unwrap();
            let mut rng = SeededRng::new(seed);
            let f: Vec<f64> = (0..64).map(|_| rng.uniform()).collect();
            let h: Vec<f64> = (0..64).map(|_| rng.uniform()).collect();
            let combo = DensityField::from_values(g, f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect()).unwrap();
            let lhs = integrate(&combo).unwrap();
            let rhs = a * integrate(&DensityField::from_values(g, f).unwrap()).unwrap()
                + b * integrate(&DensityField::from_values(g, h).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn gradient_obeys_leibniz(k1 in 1usize..5, k2 in 1usize..5, p1 in 0.0f64..6.0, p2 in 0.0f64..6.0) {
            // band-limited factors whose product stays below Nyquist
            let g = Grid::new(1, 64, 0.0, 2.0 * std::f64::consts::PI).unwrap();
            let f = ComplexField::from_fn(g, |x| Complex64::new(0.0, k1 as f64 * x[0] + p1).exp() + 0.5);
            let h = ComplexField::from_fn(g, |x| Complex64::new((k2 as f64 * x[0] + p2).cos(), 0.0));
            let fh = ComplexField::from_values(g, f.values.iter().zip(&h.values).map(|(a, b)| a * b).collect()).unwrap();
            let df = &gradient(&f).unwrap()[0];
            let dh = &gradient(&h).unwrap()[0];
            let dfh = &gradient(&fh).unwrap()[0];
            for i in 0..64 {
                let rhs = df.values[i] * h.values[i] + f.values[i] * dh.values[i];
                prop_assert!((dfh.values[i] - rhs).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn sample_histogram_converges() {
        // L1(empirical, rho) ≤ 3 · 2·sqrt(n/N)
        let g = Grid::centered(1, 64, 6.0).unwrap();
        let mut rho = DensityField::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        rho.renormalize().unwrap();
        let sampler = CellSampler::new(&rho).unwrap();
        let mut rng = SeededRng::new(77);
        let n_samples = 20_000;
        let pts: Vec<Vec<f64>> = (0..n_samples).map(|_| sampler.sample(&mut rng)).collect();
        let l1 = histogram_density(&g, &pts).l1_distance(&rho);
        let bound = 3.0 * 2.0 * (64.0 / n_samples as f64).sqrt();
        assert!(l1 <= bound, "{l1} > {bound}");
    }
}
