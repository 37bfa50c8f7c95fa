//! `PWF1` binary snapshots of fields and increment paths.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  "PWF1"   4 bytes
//! D      u32      configuration dimension (paths: number of components)
//! n      u32      points per axis (paths: number of steps)
//! a      f64      lower box edge (paths: start time)
//! b      f64      upper box edge (paths: end time)
//! t      f64      snapshot time (paths: step size dt)
//! kind   u8       0 = real, 1 = complex, 2 = increment path
//! values f64...   row-major; two per cell for complex (re, im);
//!                 paths are step-major, D values per step
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use super::field::{ComplexField, DensityField};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PWF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SnapshotKind {
    Real = 0,
    Complex = 1,
    Path = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub dim: u32,
    pub n: u32,
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub kind: SnapshotKind,
}

/// Decoded snapshot payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Real { t: f64, field: DensityField },
    Complex { t: f64, field: ComplexField },
    Path(IncrementPath),
}

/// Time-indexed increments (`dB`, `dY` or `dW`), one vector per step.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPath {
    pub dt: f64,
    pub t0: f64,
    pub components: usize,
    pub increments: Vec<Vec<f64>>,
}

impl IncrementPath {
    pub fn new(dt: f64, components: usize) -> Self {
        Self {
            dt,
            t0: 0.0,
            components,
            increments: Vec::new(),
        }
    }

    pub fn push(&mut self, inc: Vec<f64>) {
        debug_assert_eq!(inc.len(), self.components);
        self.increments.push(inc);
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Little-endian bytes of every increment, for hashing.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.increments
            .iter()
            .flatten()
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    /// Cumulative sums (the path itself) at every step, starting at zero.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        let mut acc = vec![0.0; self.components];
        let mut out = vec![acc.clone()];
        for inc in &self.increments {
            for (a, d) in acc.iter_mut().zip(inc) {
                *a += d;
            }
            out.push(acc.clone());
        }
        out
    }
}

fn write_header<W: Write>(w: &mut W, h: &SnapshotHeader) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&h.dim.to_le_bytes())?;
    w.write_all(&h.n.to_le_bytes())?;
    w.write_all(&h.a.to_le_bytes())?;
    w.write_all(&h.b.to_le_bytes())?;
    w.write_all(&h.t.to_le_bytes())?;
    w.write_all(&[h.kind as u8])?;
    Ok(())
}

pub fn write_density<W: Write>(w: &mut W, field: &DensityField, t: f64) -> Result<()> {
    let g = field.grid;
    write_header(
        w,
        &SnapshotHeader {
            dim: g.dim as u32,
            n: g.n as u32,
            a: g.a,
            b: g.b,
            t,
            kind: SnapshotKind::Real,
        },
    )?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_complex<W: Write>(w: &mut W, field: &ComplexField, t: f64) -> Result<()> {
    let g = field.grid;
    write_header(
        w,
        &SnapshotHeader {
            dim: g.dim as u32,
            n: g.n as u32,
            a: g.a,
            b: g.b,
            t,
            kind: SnapshotKind::Complex,
        },
    )?;
    for v in &field.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_path<W: Write>(w: &mut W, path: &IncrementPath) -> Result<()> {
    write_header(
        w,
        &SnapshotHeader {
            dim: path.components as u32,
            n: path.len() as u32,
            a: path.t0,
            b: path.t0 + path.dt * path.len() as f64,
            t: path.dt,
            kind: SnapshotKind::Path,
        },
    )?;
    w.write_all(&path.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_header<R: Read>(r: &mut R) -> Result<SnapshotHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dim = read_u32(r)?;
    let n = read_u32(r)?;
    let a = read_f64(r)?;
    let b = read_f64(r)?;
    let t = read_f64(r)?;
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let kind = match kind[0] {
        0 => SnapshotKind::Real,
        1 => SnapshotKind::Complex,
        2 => SnapshotKind::Path,
        k => return Err(Error::Format(format!("unknown kind byte {k}"))),
    };
    Ok(SnapshotHeader {
        dim,
        n,
        a,
        b,
        t,
        kind,
    })
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Snapshot> {
    let h = read_header(r)?;
    match h.kind {
        SnapshotKind::Path => {
            let components = h.dim as usize;
            let mut increments = Vec::with_capacity(h.n as usize);
            for _ in 0..h.n {
                let inc = (0..components)
                    .map(|_| read_f64(r))
                    .collect::<Result<Vec<_>>>()?;
                increments.push(inc);
            }
            Ok(Snapshot::Path(IncrementPath {
                dt: h.t,
                t0: h.a,
                components,
                increments,
            }))
        }
        SnapshotKind::Real => {
            let grid = Grid::new(h.dim as usize, h.n as usize, h.a, h.b)?;
            let values = (0..grid.cells())
                .map(|_| read_f64(r))
                .collect::<Result<Vec<_>>>()?;
            Ok(Snapshot::Real {
                t: h.t,
                field: DensityField::from_values(grid, values)?,
            })
        }
        SnapshotKind::Complex => {
            let grid = Grid::new(h.dim as usize, h.n as usize, h.a, h.b)?;
            let values = (0..grid.cells())
                .map(|_| Ok(Complex64::new(read_f64(r)?, read_f64(r)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Snapshot::Complex {
                t: h.t,
                field: ComplexField::from_values(grid, values)?,
            })
        }
    }
}
