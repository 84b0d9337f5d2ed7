//! Goodness-of-fit tests and small summary statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn mean_se(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 2 {
        return Err(Error::EmptySample);
    }
    Ok(Estimate { value: mean(xs), se: (variance(xs) / xs.len() as f64).sqrt() })
}

/// Mean of `xs` with a standard error from `batches` contiguous batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> Result<Estimate> {
    if batches < 2 || xs.len() < batches {
        return Err(Error::EmptySample);
    }
    let means: Vec<f64> = batch_bounds(xs.len(), batches).map(|(lo, hi)| mean(&xs[lo..hi])).collect();
    Ok(Estimate { value: mean(xs), se: (variance(&means) / batches as f64).sqrt() })
}

/// Contiguous `[lo, hi)` ranges splitting `n` items into `batches` near-equal parts.
pub fn batch_bounds(n: usize, batches: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..batches).map(move |b| (b * n / batches, (b + 1) * n / batches))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Lag-1 autocorrelation with its null standard error `1/√n`.
pub fn lag1_autocorrelation(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 3 {
        return Err(Error::EmptySample);
    }
    let m = mean(xs);
    let den: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    Ok(Estimate { value: num / den, se: 1.0 / (xs.len() as f64).sqrt() })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact two-sample Kolmogorov–Smirnov statistic with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: ks_p(d, na * nb / (na + nb)), n_a: a.len(), n_b: b.len() })
}

/// One-sample test against any continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    let d = v.iter().enumerate().fold(0.0f64, |d, (k, &x)| {
        let f = cdf(x);
        d.max(f - k as f64 / n).max((k + 1) as f64 / n - f)
    });
    Ok(KsResult { statistic: d, p_value: ks_p(d, n), n_a: v.len(), n_b: 0 })
}

pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidModel(e.to_string()))?;
    ks_one_sample(xs, |x| normal.cdf(x))
}

/// Asymptotic two-sample critical value at level `alpha`.
pub fn ks_critical(alpha: f64, n_a: usize, n_b: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n_a + n_b) as f64 / (n_a * n_b) as f64).sqrt()
}

/// Pearson χ² goodness of fit. Adjacent bins are pooled from the right until
/// every expected count is at least 5.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::EmptySample);
    }
    let total: u64 = observed.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (k, (&o, &p)) in observed.iter().zip(probs).enumerate().rev() {
        acc.0 += o as f64;
        acc.1 += p * total as f64;
        if acc.1 >= 5.0 || k == 0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if bins.len() > 1 && bins.last().is_some_and(|b| b.1 < 5.0) {
        let b = bins.pop().expect("nonempty");
        let l = bins.last_mut().expect("nonempty");
        l.0 += b.0;
        l.1 += b.1;
    }
    if bins.len() < 2 {
        return Err(Error::EmptySample);
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidModel(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: dist.sf(statistic) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::stream::{Purpose, SeedTag};

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = SeedTag::new(seed, 0).rng(Purpose::Oracle);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
    }

    #[test]
    fn ks_identical_samples() {
        let a = normals(1, 500, 0.0);
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_calibration_and_power() {
        let a = normals(2, 10_000, 0.0);
        let b = normals(3, 10_000, 0.0);
        let r = ks_two_sample(&a, &b).unwrap();
        assert!(r.statistic < 0.03, "{r:?}");
        let c = normals(4, 10_000, 1.0);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
        assert!(ks_normal(&a, 0.0, 1.0).unwrap().p_value > 1e-4);
        assert!(ks_normal(&c, 0.0, 1.0).unwrap().p_value < 1e-6);
    }

    #[test]
    fn ks_null_rejection_rate() {
        let mut rejections = 0;
        for s in 0..200 {
            let a = normals(100 + s, 300, 0.0);
            if ks_normal(&a, 0.0, 1.0).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        // binomial(200, 0.05) has sd ≈ 3.1
        assert!((2..=22).contains(&rejections), "{rejections}");
    }

    #[test]
    fn kolmogorov_known_quantiles() {
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.627_6) - 0.01).abs() < 1e-3);
        assert!((ks_critical(0.05, 10_000, 10_000) - 0.019_2).abs() < 2e-4);
    }

    #[test]
    fn chi_square_fair_die() {
        let mut rng = SeedTag::new(5, 0).rng(Purpose::Oracle);
        let mut obs = [0u64; 6];
        for _ in 0..6000 {
            obs[rng.random_range(0..6)] += 1;
        }
        let r = chi_square_gof(&obs, &[1.0 / 6.0; 6]).unwrap();
        assert_eq!(r.dof, 5);
        assert!(r.p_value > 0.001);
        let skewed = [2000, 800, 800, 800, 800, 800];
        assert!(chi_square_gof(&skewed, &[1.0 / 6.0; 6]).unwrap().p_value < 1e-10);
    }

    #[test]
    fn chi_square_pools_sparse_bins() {
        let r = chi_square_gof(&[50, 30, 15, 4, 1, 0], &[0.5, 0.3, 0.15, 0.04, 0.009, 0.001]).unwrap();
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn lag1_of_iid_is_small() {
        let a = normals(6, 10_000, 0.0);
        assert!(lag1_autocorrelation(&a).unwrap().within(0.0, 4.0));
        let ar: Vec<f64> = a.iter().scan(0.0, |s, x| { *s = 0.8 * *s + x; Some(*s) }).collect();
        assert!(lag1_autocorrelation(&ar).unwrap().value > 0.7);
    }

    #[test]
    fn batch_means_of_iid_matches_naive_se() {
        let a = normals(7, 30_000, 0.0);
        let b = batch_means(&a, 30).unwrap();
        let n = mean_se(&a).unwrap();
        assert!((b.se / n.se - 1.0).abs() < 0.4);
    }
}
