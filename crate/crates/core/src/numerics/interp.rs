//! Periodic tensor-product interpolation of grid samples at off-grid points.

use super::grid::{Grid, MAX_DIM};

/// Interpolation stencil along one axis.
pub trait Stencil {
    const WIDTH: usize;
    /// Offset of the first stencil node relative to the base node.
    const FIRST: i64;
    fn weights(t: f64, out: &mut [f64]);
}

/// Four-point Catmull-Rom spline (C¹, reproduces quadratics).
pub struct CatmullRom;

impl Stencil for CatmullRom {
    const WIDTH: usize = 4;
    const FIRST: i64 = -1;
    #[inline]
    fn weights(t: f64, out: &mut [f64]) {
        let t2 = t * t;
        let t3 = t2 * t;
        out[0] = 0.5 * (-t3 + 2.0 * t2 - t);
        out[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
        out[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
        out[3] = 0.5 * (t3 - t2);
    }
}

/// Six-point Lagrange interpolation (fifth order), nodes at offsets -2..=3.
pub struct Lagrange6;

impl Stencil for Lagrange6 {
    const WIDTH: usize = 6;
    const FIRST: i64 = -2;
    #[inline]
    fn weights(t: f64, out: &mut [f64]) {
        let d = [t + 2.0, t + 1.0, t, t - 1.0, t - 2.0, t - 3.0];
        // denominators Π_{m≠j}(j − m) for nodes -2..=3
        const DEN: [f64; 6] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];
        for j in 0..6 {
            let mut p = 1.0;
            for (m, dm) in d.iter().enumerate() {
                if m != j {
                    p *= dm;
                }
            }
            out[j] = p / DEN[j];
        }
    }
}

/// Interpolate `values` (row-major on `grid`) at `point`.
#[inline]
pub fn interpolate<S: Stencil>(grid: &Grid, values: &[f64], point: &[f64]) -> f64 {
    let dim = grid.dim;
    let mut base = [0usize; MAX_DIM];
    let mut w = [[0.0; 6]; MAX_DIM];
    let mut nodes = [[0usize; 6]; MAX_DIM];
    for k in 0..dim {
        let (j0, t) = grid.locate(point[k]);
        S::weights(t, &mut w[k][..S::WIDTH]);
        for s in 0..S::WIDTH {
            nodes[k][s] = grid.periodic(j0 + S::FIRST + s as i64);
        }
        base[k] = 0;
    }
    match dim {
        1 => {
            let mut acc = 0.0;
            for s in 0..S::WIDTH {
                acc += w[0][s] * values[nodes[0][s]];
            }
            acc
        }
        _ => {
            let n = grid.n;
            let mut acc = 0.0;
            let total = S::WIDTH.pow(dim as u32);
            for combo in 0..total {
                let mut c = combo;
                let mut weight = 1.0;
                let mut idx = 0;
                for k in (0..dim).rev() {
                    let s = c % S::WIDTH;
                    c /= S::WIDTH;
                    weight *= w[k][s];
                    base[k] = nodes[k][s];
                }
                for &b in &base[..dim] {
                    idx = idx * n + b;
                }
                acc += weight * values[idx];
            }
            acc
        }
    }
}
