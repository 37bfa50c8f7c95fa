use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported configuration dimension.
pub const MAX_DIM: usize = 3;
/// Memory budget for a single field, in cells.
pub const MAX_CELLS: usize = 1 << 24;

/// Uniform periodic grid over `[a, b)^D`.
///
/// Node `j` on every axis sits at `a + j·h`; the cell belonging to a node is
/// `[x_j - h/2, x_j + h/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, a: f64, b: f64) -> Result<Self> {
        let grid = Self { dim, n, a, b };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid centred on the origin, `[-half_width, half_width)` per axis.
    pub fn centered(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        Self::new(dim, n, -half_width, half_width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension {} outside 1..={MAX_DIM}",
                self.dim
            )));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {} must be a power of two >= 8",
                self.n
            )));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.b > self.a) {
            return Err(Error::InvalidGrid(format!(
                "extent [{}, {}) is empty or non-finite",
                self.a, self.b
            )));
        }
        let cells = (self.n as u128).pow(self.dim as u32);
        if cells > MAX_CELLS as u128 {
            return Err(Error::InvalidGrid(format!(
                "{cells} cells exceed the budget of {MAX_CELLS}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length() / self.n as f64
    }

    /// `h^D`, the quadrature weight of one cell.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Node coordinate along one axis.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        self.a + j as f64 * self.spacing()
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    /// Row-major stride of `axis` (the last axis is contiguous).
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis node indices of a flat cell index.
    #[inline]
    pub fn unflatten(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    #[inline]
    pub fn flatten(&self, index: &[usize]) -> usize {
        index[..self.dim].iter().fold(0, |acc, &j| acc * self.n + j)
    }

    /// Coordinates of the node of a flat cell index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let ix = self.unflatten(idx);
        (0..self.dim).map(|k| self.coord(ix[k])).collect()
    }

    /// Map a coordinate into `[a, b)`.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length();
        let y = self.a + (x - self.a).rem_euclid(l);
        // rem_euclid can round up to exactly l
        if y >= self.b {
            self.a
        } else {
            y
        }
    }

    /// Minimum-image representative of a displacement, in `[-L/2, L/2)`.
    #[inline]
    pub fn min_image(&self, dx: f64) -> f64 {
        let l = self.length();
        dx - l * (dx / l + 0.5).floor()
    }

    /// Index of the cell containing `x` (nearest node, periodic).
    #[inline]
    pub fn nearest_index(&self, x: f64) -> usize {
        let h = self.spacing();
        let j = ((x - self.a) / h).round() as i64;
        j.rem_euclid(self.n as i64) as usize
    }

    /// Flat index of the cell containing a configuration point.
    pub fn cell_of(&self, point: &[f64]) -> usize {
        let mut idx = 0;
        for &x in &point[..self.dim] {
            idx = idx * self.n + self.nearest_index(x);
        }
        idx
    }

    /// Split a coordinate into a base node index and the fractional offset
    /// `t ∈ [0, 1)` towards the next node.
    #[inline]
    pub fn locate(&self, x: f64) -> (i64, f64) {
        let s = (x - self.a) / self.spacing();
        let base = s.floor();
        (base as i64, s - base)
    }

    #[inline]
    pub fn periodic(&self, j: i64) -> usize {
        j.rem_euclid(self.n as i64) as usize
    }

    /// Grid on one axis with the same extent.
    pub fn axis_grid(&self) -> Grid {
        Grid { dim: 1, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(1, 7, 0.0, 1.0).is_err());
        assert!(Grid::new(1, 12, 0.0, 1.0).is_err());
        assert!(Grid::new(0, 8, 0.0, 1.0).is_err());
        assert!(Grid::new(4, 8, 0.0, 1.0).is_err());
        assert!(Grid::new(1, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(3, 1024, 0.0, 1.0).is_err());
        assert!(Grid::new(3, 256, 0.0, 1.0).is_ok());
    }

    #[test]
    fn flatten_roundtrip() {
        let g = Grid::new(3, 8, -1.0, 1.0).unwrap();
        for idx in [0, 1, 9, 77, 511] {
            let ix = g.unflatten(idx);
            assert_eq!(g.flatten(&ix), idx);
        }
        assert_eq!(g.stride(0), 64);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn wrapping() {
        let g = Grid::centered(1, 16, 4.0).unwrap();
        assert!((g.wrap(4.5) - -3.5).abs() < 1e-12);
        assert!((g.wrap(-4.5) - 3.5).abs() < 1e-12);
        assert!((g.min_image(7.0) - -1.0).abs() < 1e-12);
        assert_eq!(g.nearest_index(g.coord(5) + 0.2 * g.spacing()), 5);
        assert_eq!(g.nearest_index(3.99), 0);
    }
}
