//! Analytic-peaks fast path for `H = 0`.
//!
//! When ψ is a superposition of narrow, well separated packets and the
//! Hamiltonian is switched off, only the packet weights change. Component `k`
//! has every particle at `sites[k]`, so a hit on any particle multiplies
//! `p_k` by `exp{−(sites[k]−z)²/σ²}` with `z ~ Σₖ pₖ N(sites[k], σ²/2)`.
//! In the continuous model the weights are an explicit function of the
//! observation: choose `K ~ p₀`, set `Y_t = g·x_K·t + B_t`, then
//! `p_k(t) ∝ p₀ₖ exp{g·x_k·Y_t − ½g²x_k²t}`.

use crate::error::{Error, Result};
use crate::numerics::stats::standard_normal_cdf;
use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakState {
    pub sites: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PeakState {
    pub fn new(sites: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if sites.is_empty() || sites.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: sites.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(
                "peak weights must be finite and >= 0".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            sites,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Weight `p0` at `−d/2` and `1 − p0` at `+d/2`.
    pub fn two(p0: f64, separation: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidParameter(format!("p0 = {p0} outside [0, 1]")));
        }
        Self::new(
            vec![-0.5 * separation, 0.5 * separation],
            vec![p0, 1.0 - p0],
        )
    }

    pub fn mean(&self) -> f64 {
        self.sites
            .iter()
            .zip(&self.weights)
            .map(|(x, p)| x * p)
            .sum()
    }

    fn weights_from_log(&self, log_w: &[f64]) -> Vec<f64> {
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    fn draw_component(&self, rng: &mut SeededRng) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (k, p) in self.weights.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.weights.len() - 1
    }
}

/// Stop once `weights[0]` leaves `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitBand {
    pub lo: f64,
    pub hi: f64,
}

impl ExitBand {
    pub fn contains(&self, p: f64) -> bool {
        p > self.lo && p < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakOutcome {
    pub weights: Vec<f64>,
    pub hits: usize,
    /// Time at which the weights left the exit band, if they did.
    pub exit_time: Option<f64>,
}

/// Discrete hits at total rate `Σλᵢ` until `horizon` (or until exit).
/// The particle index of each hit is drawn with probability `λᵢ/Σλ`; it
/// does not affect the weights since every particle shares the site.
pub fn evolve_discrete(
    state: &PeakState,
    rates: &[f64],
    sigma: f64,
    horizon: f64,
    band: Option<ExitBand>,
    rng: &mut SeededRng,
) -> Result<PeakOutcome> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be > 0, got {sigma}"
        )));
    }
    let total: f64 = rates.iter().sum();
    let mut log_w: Vec<f64> = state.weights.iter().map(|p| p.ln()).collect();
    let mut current = state.clone();
    let mut t = 0.0;
    let mut hits = 0;
    let spread = sigma / std::f64::consts::SQRT_2;
    if total > 0.0 {
        loop {
            t += rng.exponential(total);
            if t > horizon {
                break;
            }
            let _particle = draw_particle(rates, total, rng);
            let k = current.draw_component(rng);
            let z = current.sites[k] + spread * rng.standard_normal();
            for (l, x) in log_w.iter_mut().zip(&current.sites) {
                *l -= (x - z).powi(2) / (sigma * sigma);
            }
            current.weights = current.weights_from_log(&log_w);
            hits += 1;
            if let Some(b) = band {
                if !b.contains(current.weights[0]) {
                    return Ok(PeakOutcome {
                        weights: current.weights,
                        hits,
                        exit_time: Some(t),
                    });
                }
            }
        }
    }
    Ok(PeakOutcome {
        weights: current.weights,
        hits,
        exit_time: None,
    })
}

fn draw_particle(rates: &[f64], total: f64, rng: &mut SeededRng) -> usize {
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    for (i, r) in rates.iter().enumerate() {
        acc += r;
        if u < acc {
            return i;
        }
    }
    rates.len() - 1
}

/// Exact continuous-model weights at time `t` (`g` is the effective coupling
/// `sqrt(Σ Gᵢ²)` for a bulk superposition).
pub fn continuous_at(state: &PeakState, g: f64, t: f64, rng: &mut SeededRng) -> Vec<f64> {
    let k = state.draw_component(rng);
    let y = g * state.sites[k] * t + t.sqrt() * rng.standard_normal();
    let log_w: Vec<f64> = state
        .sites
        .iter()
        .zip(&state.weights)
        .map(|(x, p)| p.ln() + g * x * y - 0.5 * g * g * x * x * t)
        .collect();
    state.weights_from_log(&log_w)
}

/// Exact continuous-model path sampled every `dt` until `horizon` or exit.
pub fn evolve_continuous(
    state: &PeakState,
    g: f64,
    dt: f64,
    horizon: f64,
    band: Option<ExitBand>,
    rng: &mut SeededRng,
) -> Result<PeakOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimestep(dt));
    }
    let k = state.draw_component(rng);
    let steps = (horizon / dt).round() as usize;
    let mut y = 0.0;
    let mut weights = state.weights.clone();
    for s in 1..=steps {
        y += g * state.sites[k] * dt + dt.sqrt() * rng.standard_normal();
        let t = s as f64 * dt;
        let log_w: Vec<f64> = state
            .sites
            .iter()
            .zip(&state.weights)
            .map(|(x, p)| p.ln() + g * x * y - 0.5 * g * g * x * x * t)
            .collect();
        weights = state.weights_from_log(&log_w);
        if let Some(b) = band {
            if !b.contains(weights[0]) {
                return Ok(PeakOutcome {
                    weights,
                    hits: 0,
                    exit_time: Some(t),
                });
            }
        }
    }
    Ok(PeakOutcome {
        weights,
        hits: 0,
        exit_time: None,
    })
}

/// Exact CDF of the first weight at time `t` in the continuous model, for a
/// two-site state.
pub fn two_site_continuous_cdf(state: &PeakState, g: f64, t: f64, q: f64) -> Result<f64> {
    if state.sites.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: state.sites.len(),
        });
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    if q >= 1.0 {
        return Ok(1.0);
    }
    let (xa, xb) = (state.sites[0], state.sites[1]);
    let (pa, pb) = (state.weights[0], state.weights[1]);
    let slope = g * (xa - xb);
    if slope == 0.0 || t <= 0.0 {
        return Ok(if q >= pa { 1.0 } else { 0.0 });
    }
    // logit p = ln(pa/pb) + slope·Y − ½g²(xa²−xb²)t, monotone in Y
    let logit = (q / (1.0 - q)).ln();
    let y = (logit - (pa / pb).ln() + 0.5 * g * g * (xa * xa - xb * xb) * t) / slope;
    let sd = t.sqrt();
    let below = |mu: f64| {
        let c = standard_normal_cdf((y - mu) / sd);
        if slope > 0.0 {
            c
        } else {
            1.0 - c
        }
    };
    Ok(pa * below(g * xa * t) + pb * below(g * xb * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::stats::{ks_one_sample, mean};

    #[test]
    fn continuous_weights_are_a_martingale() {
        let s = PeakState::two(0.7, 4.0).unwrap();
        let mut rng = SeededRng::new(1);
        let p: Vec<f64> = (0..20_000)
            .map(|_| continuous_at(&s, 1.0, 0.05, &mut rng)[0])
            .collect();
        let sd = (0.21f64 / 20_000.0).sqrt();
        assert!((mean(&p) - 0.7).abs() < 3.0 * sd);
    }

    #[test]
    fn sampled_weights_follow_exact_cdf() {
        let s = PeakState::two(0.7, 4.0).unwrap();
        let mut rng = SeededRng::new(2);
        let p: Vec<f64> = (0..5000)
            .map(|_| continuous_at(&s, 1.0, 0.1, &mut rng)[0])
            .collect();
        let d = ks_one_sample(&p, |q| two_site_continuous_cdf(&s, 1.0, 0.1, q).unwrap());
        assert!(d < 1.63 / (5000f64).sqrt(), "{d}");
    }

    #[test]
    fn path_endpoint_matches_one_shot() {
        let s = PeakState::two(0.4, 3.0).unwrap();
        let mut rng = SeededRng::new(3);
        let p: Vec<f64> = (0..3000)
            .map(|_| {
                evolve_continuous(&s, 1.0, 0.01, 0.2, None, &mut rng)
                    .unwrap()
                    .weights[0]
            })
            .collect();
        let d = ks_one_sample(&p, |q| two_site_continuous_cdf(&s, 1.0, 0.2, q).unwrap());
        assert!(d < 1.63 / (3000f64).sqrt(), "{d}");
    }

    #[test]
    fn narrow_hit_collapses_to_one_site() {
        let s = PeakState::two(0.7, 10.0).unwrap();
        let mut rng = SeededRng::new(4);
        let band = ExitBand { lo: 0.01, hi: 0.99 };
        let runs = 4000;
        let mut a = 0;
        for _ in 0..runs {
            let out = evolve_discrete(&s, &[1.0], 1.0, 1e3, Some(band), &mut rng).unwrap();
            assert_eq!(out.hits, 1);
            if out.weights[0] > 0.5 {
                a += 1;
            }
        }
        let f = a as f64 / runs as f64;
        assert!((f - 0.7).abs() < 3.0 * (0.21f64 / runs as f64).sqrt());
    }

    #[test]
    fn zero_rate_means_no_hits() {
        let s = PeakState::two(0.5, 1.0).unwrap();
        let out = evolve_discrete(&s, &[0.0], 1.0, 10.0, None, &mut SeededRng::new(0)).unwrap();
        assert_eq!(out.hits, 0);
        assert_eq!(out.weights, s.weights);
    }
}
