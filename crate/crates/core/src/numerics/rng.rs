//! Seeded random-number generation.
//!
//! Every stochastic operation takes a [`SeededRng`] explicitly. The generator
//! is ChaCha8 (`rand_chacha`), a counter-based stream cipher RNG whose output
//! depends only on `(seed, stream, call sequence)` and is identical across
//! platforms. Replica generators are derived with [`SeededRng::split`]: the
//! master seed keys the cipher and the replica index selects the 64-bit
//! stream, so replica streams never overlap.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::field::DensityField;
use crate::error::{Error, Result};

/// Name recorded in seed manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 + set_stream(index)";

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::split(seed, 0)
    }

    /// Independent generator for replica `index` under `master`.
    pub fn split(master: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master);
        inner.set_stream(index);
        Self {
            seed: master,
            stream: index,
            inner,
        }
    }

    /// Generator for a named sub-purpose of one replica (e.g. observation
    /// noise vs. prior sampling), so unrelated draws never share a stream.
    pub fn substream(master: u64, index: u64, purpose: u64) -> Self {
        Self::split(master, index.wrapping_mul(64).wrapping_add(purpose))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Exponential waiting time with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        Exp::new(rate)
            .expect("positive rate")
            .sample(&mut self.inner)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Independent `N(0, dt)` components.
pub fn gaussian_increments(rng: &mut SeededRng, dt: f64, dim: usize) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimestep(dt));
    }
    let sd = dt.sqrt();
    Ok((0..dim).map(|_| sd * rng.standard_normal()).collect())
}

/// Inverse-CDF sampler over grid cells, for repeated draws from one density.
#[derive(Debug, Clone)]
pub struct CellSampler {
    grid: crate::numerics::Grid,
    cdf: Vec<f64>,
}

impl CellSampler {
    pub fn new(rho: &DensityField) -> Result<Self> {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(rho.values.len());
        for &v in &rho.values {
            if !v.is_finite() {
                return Err(Error::NonFiniteField);
            }
            acc += v.max(0.0);
            cdf.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            grid: rho.grid,
            cdf,
        })
    }

    /// Index of a cell drawn with probability proportional to its mass.
    pub fn sample_cell(&self, rng: &mut SeededRng) -> usize {
        let total = *self.cdf.last().unwrap();
        let u = rng.uniform() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        // skip zero-mass cells that share a cumulative value
        idx.min(self.cdf.len() - 1)
    }

    /// Cell centre plus uniform jitter within the cell, wrapped into the box.
    pub fn sample(&self, rng: &mut SeededRng) -> Vec<f64> {
        let idx = self.sample_cell(rng);
        let h = self.grid.spacing();
        self.grid
            .point(idx)
            .into_iter()
            .map(|x| self.grid.wrap(x + (rng.uniform() - 0.5) * h))
            .collect()
    }
}

/// One draw from `rho` (cell by mass, then uniform jitter within the cell).
pub fn sample_point(rho: &DensityField, rng: &mut SeededRng) -> Result<Vec<f64>> {
    Ok(CellSampler::new(rho)?.sample(rng))
}
