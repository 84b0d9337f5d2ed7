//! Exact construction of the last skeleton point left of the origin.
//!
//! The alternating stopping times `ν[k] < μ[k]`, the silver points `σ[j]`,
//! the record `M` and `Γ₀ = -σ[J]` are computed on a lazily realized copy of
//! the infinite graph. Infinite-range events ("no later row violates",
//! "no later column exceeds the record") are decided by inverting their exact
//! first-occurrence law, truncated once the remaining mass is below `tol`.

mod store;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::DenseWindowGraph;
use crate::prob_model::{EdgeProbabilityModel, DEFAULT_TOL};
use crate::stream::{Purpose, SeedTag};

use store::Store;

pub const DEFAULT_CEILING: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaOptions {
    pub tol: f64,
    /// Cap on elementary draws per construction.
    pub ceiling: u64,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, ceiling: DEFAULT_CEILING }
    }
}

/// One run of the alternating recursion from `origin`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursionTrace {
    pub origin: i64,
    /// `(ν[k], μ[k])` measured from `origin`; the last `μ` is infinite (`None`).
    pub nu_mu: Vec<(u64, Option<u64>)>,
}

impl RecursionTrace {
    pub fn k(&self) -> usize {
        self.nu_mu.len()
    }

    /// `ν[K]`.
    pub fn silver(&self) -> u64 {
        self.nu_mu.last().expect("a run has at least one step").0
    }

    pub fn is_interleaved(&self) -> bool {
        let mut last = 0u64;
        for &(nu, mu) in &self.nu_mu {
            if nu <= last {
                return false;
            }
            match mu {
                Some(mu) if mu > nu => last = mu,
                Some(_) => return false,
                None => last = u64::MAX,
            }
        }
        self.nu_mu.last().is_some_and(|p| p.1.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaZeroTrace {
    pub runs: Vec<RecursionTrace>,
    pub sigmas: Vec<u64>,
    pub m: u64,
    pub j: usize,
    pub gamma0: i64,
    /// Elementary draws consumed.
    pub draws: u64,
}

impl GammaZeroTrace {
    /// `K` of the first run.
    pub fn k(&self) -> usize {
        self.runs[0].k()
    }
}

/// A construction in progress, holding the realized edges for replay.
pub struct GammaZeroSampler<'m> {
    store: Store<'m>,
}

impl<'m> GammaZeroSampler<'m> {
    pub fn new(model: &'m EdgeProbabilityModel, rng: ChaCha8Rng, opts: GammaOptions) -> Result<Self> {
        if model.p1() <= 0.0 || model.tail_sum_after(0).is_none() {
            return Err(Error::ConditionViolation("the construction needs 0 < p_1 and Σ Q(k) < ∞".into()));
        }
        Ok(Self { store: Store::new(model, rng, opts.tol, opts.ceiling) })
    }

    pub fn from_seed(model: &'m EdgeProbabilityModel, seed: SeedTag, opts: GammaOptions) -> Result<Self> {
        Self::new(model, seed.rng(Purpose::GammaZero), opts)
    }

    /// First `i > 0` with `η(base - i) > i`, or `None` for `μ = ∞`.
    pub fn mu_from(&mut self, base: i64) -> Result<Option<u64>> {
        Ok(self.store.first_violation(base)?.map(|r| (base - r) as u64))
    }

    /// Alternates the two phases from `origin` until some `μ[k]` is infinite.
    pub fn run_recursion(&mut self, origin: i64) -> Result<RecursionTrace> {
        let mut nu_mu = Vec::new();
        let mut v = self.store.nu_phase(origin, origin)?;
        loop {
            match self.store.first_violation(v)? {
                None => {
                    nu_mu.push(((origin - v) as u64, None));
                    return Ok(RecursionTrace { origin, nu_mu });
                }
                Some(m) => {
                    nu_mu.push(((origin - v) as u64, Some((origin - m) as u64)));
                    v = self.store.nu_phase(v, m)?;
                }
            }
        }
    }

    pub fn record_m(&mut self) -> Result<u64> {
        self.store.record_m()
    }

    pub fn construct(&mut self) -> Result<GammaZeroTrace> {
        let m = self.store.record_m()?;
        let mut runs = Vec::new();
        let mut sigmas: Vec<u64> = Vec::new();
        let mut origin = 0i64;
        loop {
            let run = self.run_recursion(origin)?;
            origin -= run.silver() as i64;
            runs.push(run);
            sigmas.push((-origin) as u64);
            if (-origin) as u64 >= m {
                break;
            }
        }
        Ok(GammaZeroTrace { j: sigmas.len(), gamma0: origin, runs, sigmas, m, draws: self.store.draws() })
    }

    /// Every edge of `[lo, hi]`, consistent with all decisions taken so far.
    pub fn materialize(&mut self, lo: i64, hi: i64) -> Result<DenseWindowGraph> {
        self.store.materialize(lo, hi)
    }
}

pub fn construct_gamma0(model: &EdgeProbabilityModel, seed: SeedTag, opts: GammaOptions) -> Result<GammaZeroTrace> {
    GammaZeroSampler::from_seed(model, seed, opts)?.construct()
}

/// `μ` on a fresh realization; `None` is the infinite atom.
pub fn sample_mu(model: &EdgeProbabilityModel, rng: ChaCha8Rng, opts: GammaOptions) -> Result<Option<u64>> {
    GammaZeroSampler::new(model, rng, opts)?.mu_from(0)
}

/// One run of the recursion on a fresh realization.
pub fn run_recursion(model: &EdgeProbabilityModel, rng: ChaCha8Rng, opts: GammaOptions) -> Result<RecursionTrace> {
    GammaZeroSampler::new(model, rng, opts)?.run_recursion(0)
}

pub fn sample_record_m(model: &EdgeProbabilityModel, rng: ChaCha8Rng, opts: GammaOptions) -> Result<u64> {
    GammaZeroSampler::new(model, rng, opts)?.record_m()
}

/// `ν` through the chain `x_{n+1} = max(x_n, ξ(-n)) - 1` driven by fresh draws of `ξ`.
pub fn sample_nu<R: Rng + ?Sized>(model: &EdgeProbabilityModel, rng: &mut R, ceiling: u64) -> Result<u64> {
    let mut x = 0u64;
    for n in 1..=ceiling {
        x = x.max(model.sample_xi(rng)) - 1;
        if x == 0 {
            return Ok(n);
        }
    }
    Err(Error::IterationCeiling { ceiling, context: "running the ν chain" })
}

fn log_product_after(model: &EdgeProbabilityModel, n: u64, tol: f64) -> f64 {
    // Σ_{m>n} ln(1 - Q(m)), remainder folded as -Σ Q
    let mut acc = 0.0;
    let mut m = n;
    loop {
        m += 1;
        acc += (-model.tail_q(m)).ln_1p();
        let rest = model.tail_sum_after(m).map_or(f64::INFINITY, |b| b.value);
        if rest < tol || m > n + 10_000_000 {
            return acc - rest;
        }
    }
}

/// `P(n < μ < ∞) = Π_{k<=n} (1 - Q(k)) · (1 - Π_{m>n} (1 - Q(m)))`.
pub fn mu_exact(model: &EdgeProbabilityModel, n: u64) -> f64 {
    let head: f64 = (1..=n).map(|k| (-model.tail_q(k)).ln_1p()).sum();
    head.exp() * -log_product_after(model, n, 1e-15).exp_m1()
}

/// Band `[lower, upper]` for `P(μ > n | μ < ∞)`: with `S(n) = Σ_{m>n} Q(m)`,
/// `upper = S(n) / (1 - λ½)` and `lower = λ½ g(Eξ) S(n) / (1 - λ½)`, `g(x) = (1 - e^-x)/x`.
pub fn mu_tail_band(model: &EdgeProbabilityModel, n: u64) -> Result<(f64, f64)> {
    let half = model.skeleton_rate(DEFAULT_TOL)?.value.sqrt();
    let s = model.tail_sum_after(n).expect("checked by skeleton_rate").value;
    let mean = model.xi_mean().expect("checked by skeleton_rate").value;
    let g = -(-mean).exp_m1() / mean;
    Ok((half * g * s / (1.0 - half), s / (1.0 - half)))
}

/// Running-mean diagnostic for `E|Γ₀|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    /// Means of the two halves agree within 3 combined standard errors.
    pub stable: bool,
    /// Set when `Σ k Q(k)` diverges, so finiteness of the mean is not guaranteed.
    pub warning: Option<String>,
}

pub fn gamma0_moment_check(model: &EdgeProbabilityModel, samples: &[i64]) -> Result<MomentReport> {
    if samples.len() < 2 {
        return Err(Error::EmptySample);
    }
    let abs: Vec<f64> = samples.iter().map(|&g| g.unsigned_abs() as f64).collect();
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    };
    let (mean, se) = stats(&abs);
    let half = abs.len() / 2;
    let (m1, s1) = stats(&abs[..half]);
    let (m2, s2) = stats(&abs[half..]);
    let warning = model
        .weighted_tail_sum_after(0)
        .is_none()
        .then(|| "Σ k Q(k) diverges; the mean of |Γ₀| need not be finite".to_string());
    Ok(MomentReport {
        n: abs.len(),
        mean,
        se,
        first_half_mean: m1,
        second_half_mean: m2,
        stable: (m1 - m2).abs() <= 3.0 * (s1 * s1 + s2 * s2).sqrt(),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton_scan::{reaches_all, window_points};

    fn half() -> EdgeProbabilityModel {
        EdgeProbabilityModel::constant(0.5).unwrap()
    }

    #[test]
    fn mu_exact_values() {
        let m = half();
        // P(μ = ∞) = λ½ = Π (1 - 2^-j)
        let lam_half = m.skeleton_rate(1e-14).unwrap().value.sqrt();
        assert!((lam_half - 0.288_788_095).abs() < 1e-8);
        assert!((mu_exact(&m, 1) - 0.211_211_904_7).abs() < 1e-6, "{}", mu_exact(&m, 1));
        // P(0 < μ < ∞) = 1 - λ½
        assert!((mu_exact(&m, 0) - (1.0 - lam_half)).abs() < 1e-12);
    }

    #[test]
    fn trace_invariants() {
        let m = half();
        for r in 0..300 {
            let tr = construct_gamma0(&m, SeedTag::new(50, r), GammaOptions::default()).unwrap();
            assert!(tr.runs.iter().all(RecursionTrace::is_interleaved));
            assert!(tr.sigmas.windows(2).all(|w| w[0] < w[1]));
            assert!(*tr.sigmas.last().unwrap() >= tr.m);
            assert!(tr.sigmas[..tr.j - 1].iter().all(|&s| s < tr.m));
            assert_eq!(tr.gamma0, -(tr.sigmas[tr.j - 1] as i64));
            assert!(tr.gamma0 <= -1);
        }
    }

    #[test]
    fn silver_points_reach_the_origin() {
        let m = half();
        for r in 0..100 {
            let mut s = GammaZeroSampler::from_seed(&m, SeedTag::new(51, r), GammaOptions::default()).unwrap();
            let tr = s.construct().unwrap();
            let lo = -(*tr.sigmas.last().unwrap() as i64);
            let g = s.materialize(lo, 0).unwrap();
            for &sig in &tr.sigmas {
                assert!(reaches_all(&g, -(sig as i64), 0));
            }
        }
    }

    #[test]
    fn gamma0_is_the_last_window_point() {
        let m = half();
        let mut agree = 0;
        let runs = 200;
        for r in 0..runs {
            let mut s = GammaZeroSampler::from_seed(&m, SeedTag::new(52, r), GammaOptions::default()).unwrap();
            let tr = s.construct().unwrap();
            let g = s.materialize(-150, 150).unwrap();
            let (pts, _) = window_points(&g, 16).unwrap();
            let last_negative = pts.iter().copied().filter(|&p| p < 0).max();
            if last_negative == Some(tr.gamma0) {
                agree += 1;
            }
        }
        assert!(agree >= runs - 2, "{agree} of {runs}");
    }

    #[test]
    fn nu_chain_basics() {
        let m = half();
        let mut rng = SeedTag::new(53, 0).rng(Purpose::Oracle);
        for _ in 0..1000 {
            assert!(sample_nu(&m, &mut rng, DEFAULT_CEILING).unwrap() >= 1);
        }
        let dense = EdgeProbabilityModel::constant(0.999_999).unwrap();
        assert_eq!(sample_nu(&dense, &mut rng, 10).unwrap(), 1);
    }

    #[test]
    fn record_m_at_zero_has_mass_lambda_half() {
        let m = half();
        let n = 20_000;
        let zeros = (0..n)
            .filter(|&r| sample_record_m(&m, SeedTag::new(54, r).rng(Purpose::GammaZero), GammaOptions::default()).unwrap() == 0)
            .count();
        let p = 0.288_788_095;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - p).abs() < 3.5 * se);
    }

    #[test]
    fn moment_report_flags() {
        let heavy = EdgeProbabilityModel::power_decay(1.5).unwrap();
        let r = gamma0_moment_check(&heavy, &[-1, -3, -2, -8]).unwrap();
        assert!(r.warning.is_some());
        let r = gamma0_moment_check(&half(), &[-1, -3, -2, -8]).unwrap();
        assert!(r.warning.is_none());
        assert!(gamma0_moment_check(&half(), &[]).is_err());
    }

    #[test]
    fn ceiling_is_reported() {
        let m = half();
        let opts = GammaOptions { ceiling: 5, ..Default::default() };
        let err = construct_gamma0(&m, SeedTag::new(55, 0), opts).unwrap_err();
        assert!(matches!(err, Error::IterationCeiling { ceiling: 5, .. }));
    }
}
