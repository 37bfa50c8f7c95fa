//! Sample statistics used by the statistical acceptance checks.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Lag-1 autocorrelation of one series (mean removed).
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    pooled_lag1_autocorrelation(&[xs])
}

/// Lag-1 autocorrelation pooled over independent series, each centred on
/// the grand mean; lag pairs never straddle two series.
pub fn pooled_lag1_autocorrelation<S: AsRef<[f64]>>(series: &[S]) -> f64 {
    let all: Vec<f64> = series
        .iter()
        .flat_map(|s| s.as_ref().iter().copied())
        .collect();
    let m = mean(&all);
    let denom: f64 = all.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = series
        .iter()
        .map(|s| {
            s.as_ref()
                .windows(2)
                .map(|w| (w[0] - m) * (w[1] - m))
                .sum::<f64>()
        })
        .sum();
    num / denom
}

/// `sup |F_n − F|` for a sample against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS statistic of a sample against Uniform[0, 1].
pub fn ks_uniform(samples: &[f64]) -> f64 {
    ks_one_sample(samples, |u| u.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov distance `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(D > d)` for effective sample size `n`
/// (Stephens' small-sample correction).
pub fn kolmogorov_pvalue(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// 1% critical value of the one-sample KS statistic, `1.63/√n`.
pub fn ks_critical_one_percent(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_sample_passes_ks() {
        let mut rng = SeededRng::new(3);
        let u: Vec<f64> = (0..2000).map(|_| rng.uniform()).collect();
        let d = ks_uniform(&u);
        assert!(d < ks_critical_one_percent(u.len()));
        assert!(kolmogorov_pvalue(d, u.len() as f64) > 0.01);
        let skewed: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skewed) > ks_critical_one_percent(u.len()));
    }

    #[test]
    fn two_sample_distance() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
        assert!((ks_two_sample(&[0.0, 1.0], &[0.5, 2.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pvalue_at_critical_value() {
        let n: f64 = 1e6;
        assert!((kolmogorov_pvalue(1.628 / n.sqrt(), n) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn white_noise_has_small_autocorrelation() {
        let mut rng = SeededRng::new(11);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        assert!(lag1_autocorrelation(&xs).abs() < 3.0 / 100.0);
        let walk: Vec<f64> = xs
            .iter()
            .scan(0.0, |s, x| {
                *s += x;
                Some(*s)
            })
            .collect();
        assert!(lag1_autocorrelation(&walk) > 0.9);
    }
}
