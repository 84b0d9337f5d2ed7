//! Lazily realized edges of the infinite line graph around the origin.
//!
//! Edges with target `<= 0` are kept by source row with gaps ascending; edges
//! with target `>= 1` by target column with depths ascending. A line holds a
//! realized prefix of indicators and at most one open constraint "some edge
//! among the first `c`", so every later draw is an exact conditional draw.
//! Untouched lines beyond the realized region inherit a constraint from an
//! anchor set by the last infinite-tail decision.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph_gen::DenseWindowGraph;
use crate::prob_model::EdgeProbabilityModel;

#[derive(Debug, Clone, Default)]
pub(crate) struct LazyLine {
    /// `bits[h-1]` is the indicator at gap (or depth) `h`.
    bits: Vec<bool>,
    /// Some edge among gaps `1..=c` that is not yet realized.
    pending: Option<u64>,
}

impl LazyLine {
    fn with_pending(pending: Option<u64>) -> Self {
        Self { bits: Vec::new(), pending }
    }

    fn extend(&mut self, h: u64, model: &EdgeProbabilityModel, rng: &mut ChaCha8Rng) -> u64 {
        let mut drawn = 0;
        while (self.bits.len() as u64) < h {
            let k = self.bits.len() as u64 + 1;
            let p = model.p(k as i64);
            let prob = match self.pending {
                Some(c) if k <= c && p > 0.0 => {
                    // P(edge at k | none before k, some edge among 1..=c)
                    let den = -(model.log_tail_q(c) - model.log_tail_q(k - 1)).exp_m1();
                    if den <= p { 1.0 } else { p / den }
                }
                _ => p,
            };
            let bit = rng.random::<f64>() < prob;
            if bit {
                self.pending = None;
            }
            self.bits.push(bit);
            drawn += 1;
        }
        drawn
    }

    fn realized(&self, h: u64) -> bool {
        self.bits[h as usize - 1]
    }
}

pub(crate) struct Store<'m> {
    model: &'m EdgeProbabilityModel,
    rng: ChaCha8Rng,
    /// `rows[k]` is source row `-(k+1)`.
    rows: Vec<LazyLine>,
    /// `cols[k]` is target column `k+1`.
    cols: Vec<LazyLine>,
    /// Untouched rows `r` carry the constraint "some edge among `1..=anchor-r`".
    row_anchor: Option<i64>,
    /// Untouched columns `t` carry the constraint "some edge among `1..=t-anchor`".
    col_anchor: Option<i64>,
    draws: u64,
    ceiling: u64,
    tol: f64,
}

impl<'m> Store<'m> {
    pub(crate) fn new(model: &'m EdgeProbabilityModel, rng: ChaCha8Rng, tol: f64, ceiling: u64) -> Self {
        Self {
            model,
            rng,
            rows: Vec::new(),
            cols: Vec::new(),
            row_anchor: None,
            col_anchor: None,
            draws: 0,
            ceiling,
            tol,
        }
    }

    pub(crate) fn draws(&self) -> u64 {
        self.draws
    }

    fn charge(&mut self, n: u64, context: &'static str) -> Result<()> {
        self.draws += n;
        if self.draws > self.ceiling {
            return Err(Error::IterationCeiling { ceiling: self.ceiling, context });
        }
        Ok(())
    }

    /// Lowest realized row (`0` when none).
    fn frontier(&self) -> i64 {
        -(self.rows.len() as i64)
    }

    fn touch_row(&mut self, r: i64) {
        debug_assert!(r <= -1);
        while self.frontier() > r {
            let next = self.frontier() - 1;
            let pending = self.row_anchor.map(|a| (a - next) as u64);
            self.rows.push(LazyLine::with_pending(pending));
        }
    }

    fn touch_col(&mut self, t: i64) {
        debug_assert!(t >= 1);
        while (self.cols.len() as i64) < t {
            let next = self.cols.len() as i64 + 1;
            let pending = self.col_anchor.map(|a| (next - a) as u64);
            self.cols.push(LazyLine::with_pending(pending));
        }
    }

    /// `α_{r, r+gap}` for a target `r + gap <= 0`.
    pub(crate) fn row_edge(&mut self, r: i64, gap: u64) -> Result<bool> {
        self.touch_row(r);
        let line = &mut self.rows[(-r - 1) as usize];
        let n = line.extend(gap, self.model, &mut self.rng);
        let bit = line.realized(gap);
        self.charge(n, "realizing row edges")?;
        Ok(bit)
    }

    /// `α_{t-depth, t}` for a target `t >= 1`.
    pub(crate) fn col_edge(&mut self, t: i64, depth: u64) -> Result<bool> {
        self.touch_col(t);
        let line = &mut self.cols[(t - 1) as usize];
        let n = line.extend(depth, self.model, &mut self.rng);
        let bit = line.realized(depth);
        self.charge(n, "realizing column edges")?;
        Ok(bit)
    }

    /// Any edge of row `r` among gaps `1..=c`.
    fn row_has_edge_within(&mut self, r: i64, c: u64) -> Result<bool> {
        for h in 1..=c {
            if self.row_edge(r, h)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn tail_sum(&self, n: u64) -> Result<f64> {
        self.model
            .tail_sum_after(n)
            .map(|b| b.value + b.abs_err)
            .ok_or_else(|| Error::ConditionViolation("Σ Q(k) diverges".into()))
    }

    /// First row `r < base` with `η(r) > base - r`, or `None` when every row
    /// satisfies the constraint (which then becomes the row anchor).
    pub(crate) fn first_violation(&mut self, base: i64) -> Result<Option<i64>> {
        // realized rows are checked explicitly
        let mut r = base - 1;
        while r >= self.frontier() && r <= -1 {
            if !self.row_has_edge_within(r, (base - r) as u64)? {
                return Ok(Some(r));
            }
            r -= 1;
        }
        let first_untouched = r.min(self.frontier() - 1);
        let p1 = self.model.p1();
        let anchor = self.row_anchor;
        let target = 1.0 - self.rng.random::<f64>();
        let mut survival = 1.0;
        let mut r = first_untouched;
        loop {
            let cv = (base - r) as u64;
            let log_qv = self.model.log_tail_q(cv);
            let prob = match anchor {
                Some(a) => {
                    let log_qb = self.model.log_tail_q((a - r) as u64);
                    (log_qv.exp() * -(log_qb - log_qv).exp_m1() / -log_qb.exp_m1()).max(0.0)
                }
                None => log_qv.exp(),
            };
            survival *= 1.0 - prob;
            if survival < target {
                // rows strictly between hold the constraint, row r violates it
                if r < -1 {
                    self.touch_row(r + 1);
                }
                for k in (r + 1)..first_untouched + 1 {
                    let line = &mut self.rows[(-k - 1) as usize];
                    line.pending = Some((base - k) as u64);
                }
                debug_assert_eq!(self.frontier(), r + 1);
                self.rows.push(LazyLine {
                    bits: vec![false; cv as usize],
                    pending: anchor.map(|a| (a - r) as u64),
                });
                self.charge(cv, "placing a violation")?;
                return Ok(Some(r));
            }
            self.charge(1, "scanning for a violation")?;
            if self.tail_sum(cv)? / p1 < self.tol {
                self.row_anchor = Some(base);
                return Ok(None);
            }
            r -= 1;
        }
    }

    /// Position `u < left_of` closest to `origin` such that `u` reaches every vertex of `(u, origin]`.
    pub(crate) fn nu_phase(&mut self, origin: i64, left_of: i64) -> Result<i64> {
        let mut unsatisfied: Vec<i64> = Vec::new();
        let mut r = origin - 1;
        loop {
            unsatisfied.push(r + 1);
            let mut keep = Vec::with_capacity(unsatisfied.len());
            for &m in &unsatisfied {
                if !self.row_edge(r, (m - r) as u64)? {
                    keep.push(m);
                }
            }
            unsatisfied = keep;
            if unsatisfied.is_empty() && r < left_of {
                return Ok(r);
            }
            self.charge(1, "searching for a connecting vertex")?;
            r -= 1;
        }
    }

    /// `M = sup_{i>=1} (ξ(i) - i)` by exact record sampling on the columns.
    pub(crate) fn record_m(&mut self) -> Result<u64> {
        let mut m: i64 = -1;
        let mut done: i64 = 0;
        loop {
            let target = 1.0 - self.rng.random::<f64>();
            let mut survival = 1.0;
            let mut i = done + 1;
            let exceed = loop {
                let c = (i + m) as u64;
                survival *= 1.0 - self.model.tail_q(c);
                if survival < target {
                    break Some(i);
                }
                self.charge(1, "sampling the record")?;
                if self.tail_sum(c)? < self.tol {
                    break None;
                }
                i += 1;
            };
            let Some(i) = exceed else {
                self.col_anchor = Some(-m);
                return Ok(m as u64);
            };
            for t in done + 1..i {
                self.touch_col(t);
                self.cols[(t - 1) as usize].pending = Some((t + m) as u64);
            }
            let xi = self.model.sample_xi_between(&mut self.rng, (i + m) as u64, None);
            let mut bits = vec![false; xi as usize - 1];
            bits.push(true);
            self.charge(xi, "sampling the record")?;
            debug_assert_eq!(self.cols.len() as i64, i - 1);
            self.cols.push(LazyLine { bits, pending: None });
            m = xi as i64 - i;
            done = i;
        }
    }

    /// Realizes every edge of `[lo, hi]` from the store.
    pub(crate) fn materialize(&mut self, lo: i64, hi: i64) -> Result<DenseWindowGraph> {
        let mut g = DenseWindowGraph::empty(lo, hi);
        for y in lo + 1..=hi {
            for x in lo..y {
                let e = if y <= 0 { self.row_edge(x, (y - x) as u64)? } else { self.col_edge(y, (y - x) as u64)? };
                if e {
                    g.insert(x, y);
                }
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Purpose, SeedTag};

    #[test]
    fn conditional_line_always_meets_its_constraint() {
        let m = EdgeProbabilityModel::constant(0.2).unwrap();
        let mut rng = SeedTag::new(40, 0).rng(Purpose::Oracle);
        let mut first = vec![0usize; 6];
        let n = 50_000;
        for _ in 0..n {
            let mut line = LazyLine::with_pending(Some(5));
            line.extend(5, &m, &mut rng);
            let k = line.bits.iter().position(|&b| b).expect("constraint holds");
            first[k + 1] += 1;
        }
        // P(first edge at k | first edge <= 5)
        let norm = 1.0 - m.tail_q(5);
        for k in 1..=5u64 {
            let exact = (m.tail_q(k - 1) - m.tail_q(k)) / norm;
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((first[k as usize] as f64 / n as f64 - exact).abs() < 4.0 * se, "k={k}");
        }
    }

    #[test]
    fn materialized_edges_are_memoized() {
        let m = EdgeProbabilityModel::constant(0.5).unwrap();
        let mut s = Store::new(&m, SeedTag::new(41, 0).rng(Purpose::GammaZero), 1e-12, 10_000_000);
        let a = s.materialize(-10, 10).unwrap();
        let b = s.materialize(-10, 10).unwrap();
        assert_eq!(a, b);
    }
}
