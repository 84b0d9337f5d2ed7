//! Edge-probability families `p_k`, their tail products `Q(k) = (1-p_1)...(1-p_k)`
//! and the derived quantities (skeleton rate, law of the nearest-neighbour
//! distance `ξ`) together with certified truncation bounds.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poset::Poset;

/// Truncation tolerance used when none is configured.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Term cap for certified partial sums and products.
const MAX_TERMS: u64 = 10_000_000;

/// Below this, products are combined in log-space only.
const TINY: f64 = 1e-300;

/// A value together with a certified bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub abs_err: f64,
}

impl Bounded {
    pub fn exact(value: f64) -> Self {
        Self { value, abs_err: 0.0 }
    }
}

/// The family `(p_k, k >= 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelKind {
    /// `p_k = p` for all `k`.
    Constant { p: f64 },
    /// `p_k = table[k-1]` for `k <= table.len()`, `tail` beyond.
    Table { table: Vec<f64>, tail: f64 },
    /// `Q(k) = (k+1)^(-exponent)`, i.e. `p_k = 1 - (k/(k+1))^exponent`.
    PowerDecay { exponent: f64 },
}

/// An immutable edge-probability model.
///
/// Table models cache `ln Q(k)` over the table prefix; everything beyond the
/// prefix (and every other kind) has a closed form, so the model is shared
/// read-only across workers without synchronisation.
#[derive(Debug, Clone)]
pub struct EdgeProbabilityModel {
    kind: ModelKind,
    /// `ln Q(k)` for `k = 0..=table.len()` (table models only).
    prefix_log_tail: Vec<f64>,
}

impl PartialEq for EdgeProbabilityModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Serialize for EdgeProbabilityModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EdgeProbabilityModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kind = ModelKind::deserialize(d)?;
        Self::new(kind).map_err(serde::de::Error::custom)
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidModel(format!("{what} = {p} is outside [0, 1)")));
    }
    Ok(())
}

impl EdgeProbabilityModel {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let mut prefix_log_tail = Vec::new();
        match &kind {
            ModelKind::Constant { p } => check_probability(*p, "p")?,
            ModelKind::Table { table, tail } => {
                check_probability(*tail, "tail")?;
                prefix_log_tail.reserve(table.len() + 1);
                prefix_log_tail.push(0.0);
                let mut acc = 0.0;
                for (i, &p) in table.iter().enumerate() {
                    check_probability(p, &format!("table[{i}]"))?;
                    acc += (-p).ln_1p();
                    prefix_log_tail.push(acc);
                }
            }
            ModelKind::PowerDecay { exponent } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "power-decay exponent {exponent} must be positive"
                    )));
                }
            }
        }
        Ok(Self { kind, prefix_log_tail })
    }

    pub fn constant(p: f64) -> Result<Self> {
        Self::new(ModelKind::Constant { p })
    }

    pub fn table(table: Vec<f64>, tail: f64) -> Result<Self> {
        Self::new(ModelKind::Table { table, tail })
    }

    pub fn power_decay(exponent: f64) -> Result<Self> {
        Self::new(ModelKind::PowerDecay { exponent })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Short stable digest of the model definition.
    pub fn model_hash(&self) -> String {
        let json = serde_json::to_string(&self.kind).expect("model kinds serialise");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Edge probability at distance `k`; zero for `k <= 0`.
    pub fn p(&self, k: i64) -> f64 {
        if k <= 0 {
            return 0.0;
        }
        match &self.kind {
            ModelKind::Constant { p } => *p,
            ModelKind::Table { table, tail } => table.get(k as usize - 1).copied().unwrap_or(*tail),
            ModelKind::PowerDecay { exponent } => {
                // 1 - (k/(k+1))^b = -expm1(-b ln(1 + 1/k))
                -(-exponent * (1.0 / k as f64).ln_1p()).exp_m1()
            }
        }
    }

    pub fn p1(&self) -> f64 {
        self.p(1)
    }

    /// `ln Q(k)`, with `Q(0) = 0`. Never underflows.
    pub fn log_tail_q(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.kind {
            ModelKind::Constant { p } => k as f64 * (-p).ln_1p(),
            ModelKind::Table { table, tail } => {
                let len = table.len() as u64;
                if k <= len {
                    self.prefix_log_tail[k as usize]
                } else {
                    self.prefix_log_tail[table.len()] + (k - len) as f64 * (-tail).ln_1p()
                }
            }
            ModelKind::PowerDecay { exponent } => -exponent * ((k + 1) as f64).ln(),
        }
    }

    /// `Q(k) = P(ξ > k)`.
    pub fn tail_q(&self, k: u64) -> f64 {
        self.log_tail_q(k).exp()
    }

    /// `Q(hi) / Q(lo) = P(ξ > hi | ξ > lo)` for `lo <= hi`, computed in log-space.
    pub fn tail_ratio(&self, lo: u64, hi: u64) -> f64 {
        debug_assert!(lo <= hi);
        (self.log_tail_q(hi) - self.log_tail_q(lo)).exp()
    }

    /// `Σ_{m>n} Q(m)` with a certified error bound; `None` when the series diverges.
    pub fn tail_sum_after(&self, n: u64) -> Option<Bounded> {
        match &self.kind {
            ModelKind::Constant { p } => {
                (*p > 0.0).then(|| Bounded::exact(self.tail_q(n) * (1.0 - p) / p))
            }
            ModelKind::Table { table, tail } => {
                if *tail <= 0.0 {
                    return None;
                }
                let len = table.len() as u64;
                let mut sum = 0.0;
                let mut m = n + 1;
                while m <= len {
                    sum += self.tail_q(m);
                    m += 1;
                }
                let start = n.max(len);
                sum += self.tail_q(start) * (1.0 - tail) / tail;
                Some(Bounded::exact(sum))
            }
            ModelKind::PowerDecay { exponent } => {
                // Σ_{m>n} (m+1)^-b = Σ_{k>=n+2} k^-b
                (*exponent > 1.0).then(|| hurwitz_zeta(*exponent, n + 2))
            }
        }
    }

    /// `Σ_{m>n} m Q(m)`; `None` when the series diverges.
    pub fn weighted_tail_sum_after(&self, n: u64) -> Option<Bounded> {
        let geometric = |start: u64, rate: f64| {
            // Σ_{m>start} m Q(start) r^(m-start)
            let r = 1.0 - rate;
            let q = self.tail_q(start);
            q * (start as f64 * r / rate + r / (rate * rate))
        };
        match &self.kind {
            ModelKind::Constant { p } => (*p > 0.0).then(|| Bounded::exact(geometric(n, *p))),
            ModelKind::Table { table, tail } => {
                if *tail <= 0.0 {
                    return None;
                }
                let len = table.len() as u64;
                let mut sum = 0.0;
                let mut m = n + 1;
                while m <= len {
                    sum += m as f64 * self.tail_q(m);
                    m += 1;
                }
                sum += geometric(n.max(len), *tail);
                Some(Bounded::exact(sum))
            }
            ModelKind::PowerDecay { exponent } => {
                if *exponent <= 2.0 {
                    return None;
                }
                // Σ_{k>=n+2} (k-1) k^-b = ζ(b-1, n+2) - ζ(b, n+2)
                let a = hurwitz_zeta(exponent - 1.0, n + 2);
                let b = hurwitz_zeta(*exponent, n + 2);
                Some(Bounded { value: a.value - b.value, abs_err: a.abs_err + b.abs_err })
            }
        }
    }

    /// `E ξ = Σ_{n>=0} Q(n)`.
    pub fn xi_mean(&self) -> Option<Bounded> {
        self.tail_sum_after(0).map(|b| Bounded { value: 1.0 + b.value, ..b })
    }

    /// Checks [C1] `0 < p_1 < 1`, [C2] `Σ Q(k) < ∞` and [C3] `Σ k Q(k) < ∞`.
    pub fn check_conditions(&self, tol: f64) -> Result<ConditionReport> {
        if let ModelKind::Table { table, tail } = &self.kind {
            if table.first().copied().unwrap_or(*tail) == 0.0 && *tail == 0.0 {
                return Err(Error::NonconvergentCheck(
                    "p_1 = 0 and the table has no decaying tail, so no envelope is available".into(),
                ));
            }
        }
        let c1 = self.p1() > 0.0;
        let c2 = certify_series(tol, |k| self.tail_q(k), |n| self.tail_sum_after(n));
        let c3 = certify_series(tol, |k| k as f64 * self.tail_q(k), |n| self.weighted_tail_sum_after(n));
        Ok(ConditionReport { c1, c2, c3, tol })
    }

    /// Skeleton rate `λ = Π_{j>=1} (1 - Q(j))²`.
    pub fn skeleton_rate(&self, tol: f64) -> Result<Bounded> {
        if self.tail_sum_after(0).is_none() {
            return Err(Error::ConditionViolation(
                "Σ Q(k) diverges, so the skeleton rate is zero".into(),
            ));
        }
        if self.p1() == 0.0 {
            return Err(Error::ConditionViolation("p_1 = 0".into()));
        }
        let mut log_half = 0.0; // ln Π (1 - Q(j))
        let mut n = 0u64;
        loop {
            n += 1;
            let q = self.tail_q(n);
            log_half += (-q).ln_1p();
            let q_next = self.tail_q(n + 1);
            let rest = self.tail_sum_after(n).expect("convergence checked above");
            // ln Π_{j>n}(1-Q(j)) = -Σ Q(j) - r with 0 <= r <= Q(n+1) Σ_{j>n} Q(j) / (1 - Q(n+1)).
            let second_order = q_next * rest.value / (1.0 - q_next);
            let bound = 2.0 * (second_order + rest.abs_err);
            if bound < tol || n >= MAX_TERMS {
                let log_lambda = 2.0 * (log_half - rest.value);
                let value = log_lambda.exp();
                return Ok(Bounded { value, abs_err: value * bound.exp_m1() });
            }
        }
    }

    /// Smallest `n > lo` with `ln Q(n) <= target` (exponential then binary search).
    /// Returns `None` when `Q` never drops that low.
    fn first_reaching(&self, lo: u64, target: f64) -> Option<u64> {
        let mut step = 1u64;
        let mut below = lo; // ln Q(below) > target, or below == lo
        let mut hi;
        loop {
            hi = lo.checked_add(step)?;
            if self.log_tail_q(hi) <= target {
                break;
            }
            below = hi;
            step = step.checked_mul(2)?;
            if step > (1u64 << 62) {
                return None;
            }
        }
        while hi - below > 1 {
            let mid = below + (hi - below) / 2;
            if self.log_tail_q(mid) <= target {
                hi = mid;
            } else {
                below = mid;
            }
        }
        Some(hi)
    }

    /// Draws `ξ` with `P(ξ > n) = Q(n)` by inversion.
    pub fn sample_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_xi_between(rng, 0, None)
    }

    /// Draws `ξ` conditioned on `lo < ξ <= hi` (`hi = None` for no upper bound).
    pub fn sample_xi_between<R: Rng + ?Sized>(&self, rng: &mut R, lo: u64, hi: Option<u64>) -> u64 {
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let floor = match hi {
            Some(h) => self.tail_ratio(lo, h),
            None => 0.0,
        };
        let w = floor + u * (1.0 - floor);
        let target = self.log_tail_q(lo) + w.ln();
        let n = self.first_reaching(lo, target).unwrap_or(u64::MAX);
        match hi {
            Some(h) => n.clamp(lo + 1, h),
            None => n.max(lo + 1),
        }
    }
}

/// Certification of a convergent series `Σ_{k>=1} a_k` whose tail is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSum {
    pub holds: bool,
    /// Partial sum over `1..=terms`.
    pub partial_sum: f64,
    /// Bound on the remainder `Σ_{k>terms} a_k`; infinite when the series diverges.
    pub remainder_bound: f64,
    pub terms: u64,
}

fn certify_series(
    tol: f64,
    term: impl Fn(u64) -> f64,
    tail: impl Fn(u64) -> Option<Bounded>,
) -> CertifiedSum {
    let mut partial = 0.0;
    let mut k = 0u64;
    // A divergent series is recognised analytically; report the partial sum over a fixed horizon.
    if tail(0).is_none() {
        while k < 1000 {
            k += 1;
            partial += term(k);
        }
        return CertifiedSum { holds: false, partial_sum: partial, remainder_bound: f64::INFINITY, terms: k };
    }
    loop {
        let rest = tail(k).expect("convergent");
        let bound = rest.value + rest.abs_err;
        if bound < tol || k >= MAX_TERMS {
            return CertifiedSum { holds: true, partial_sum: partial, remainder_bound: bound, terms: k };
        }
        k += 1;
        partial += term(k);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub c1: bool,
    pub c2: CertifiedSum,
    pub c3: CertifiedSum,
    pub tol: f64,
}

impl ConditionReport {
    pub fn c2(&self) -> bool {
        self.c2.holds
    }

    pub fn c3(&self) -> bool {
        self.c3.holds
    }

    pub fn flags(&self) -> BTreeMap<&'static str, bool> {
        BTreeMap::from([("C1", self.c1), ("C2", self.c2.holds), ("C3", self.c3.holds)])
    }
}

impl std::fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = |b: bool| if b { '✓' } else { '✗' };
        write!(f, "C1 {} C2 {} C3 {}", mark(self.c1), mark(self.c2.holds), mark(self.c3.holds))
    }
}

/// `Σ_{k>=a} k^-s` for `s > 1`, by explicit summation followed by an
/// Euler-Maclaurin tail; the error bound is the first omitted correction.
pub fn hurwitz_zeta(s: f64, a: u64) -> Bounded {
    debug_assert!(s > 1.0 && a >= 1);
    const SWITCH: u64 = 64;
    let mut sum = 0.0;
    let mut k = a;
    while k < SWITCH {
        sum += (k as f64).powf(-s);
        k += 1;
    }
    let x = k as f64;
    let xs = x.powf(-s);
    sum += x * xs / (s - 1.0) + xs / 2.0 + s * xs / (12.0 * x)
        - s * (s + 1.0) * (s + 2.0) * xs / (720.0 * x * x * x);
    let err = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * xs / (30240.0 * x.powi(5));
    Bounded { value: sum, abs_err: err.max(sum * f64::EPSILON * 4.0) }
}

/// Sum of `n` tiny positive quantities given as logarithms, without underflow.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// `true` when `x` is small enough that products involving it must stay in log-space.
pub fn is_tiny(x: f64) -> bool {
    x < TINY
}

/// Edge probabilities `r_{x,i,j}` of the slab graph on `ℤ × I`.
///
/// Same-level edges follow `base`. Between distinct levels `i ≺ j` the
/// probability is `vertical` at distance 0 and `lateral` at every positive distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabProbabilityModel {
    pub base: EdgeProbabilityModel,
    pub poset: Poset,
    pub vertical: f64,
    pub lateral: f64,
}

impl SlabProbabilityModel {
    pub fn new(base: EdgeProbabilityModel, poset: Poset, vertical: f64, lateral: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&vertical) {
            return Err(Error::InvalidModel(format!("vertical probability {vertical} is outside [0, 1]")));
        }
        check_probability(lateral, "lateral")?;
        Ok(Self { base, poset, vertical, lateral })
    }

    /// `r_{x,i,j}`: zero for `x < 0`, for `i ⋠ j`, and for `x = 0, i = j`.
    pub fn r(&self, x: i64, i: usize, j: usize) -> f64 {
        if x < 0 || !self.poset.leq(i, j) {
            return 0.0;
        }
        if i == j {
            self.base.p(x)
        } else if x == 0 {
            self.vertical
        } else {
            self.lateral
        }
    }

    /// `r_{0,i,j} > 0` for every `i ≺ j`.
    pub fn vertical_condition(&self) -> bool {
        self.poset.len() == 1 || self.vertical > 0.0
    }

    /// Probability that a column carries every vertical edge `i ≺ j`.
    pub fn thinning_probability(&self) -> f64 {
        self.vertical.powi(self.poset.strict_pairs().len() as i32)
    }
}
