//! Oracles shared by the integration tests. Nothing here uses the library's
//! samplers: edges are plain memoized Bernoulli draws.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `λ = Π_j (1 - (1-p)^j)^2` for constant `p`, by partial products.
pub fn lambda_product(p: f64) -> f64 {
    let q = 1.0 - p;
    let mut prod = 1.0;
    let mut qj = 1.0;
    for _ in 0..100_000 {
        qj *= q;
        if qj < 1e-18 {
            break;
        }
        prod *= (1.0 - qj) * (1.0 - qj);
    }
    prod
}

/// Rows below this depth are never inspected for a violation of `μ`.
const HORIZON: i64 = 90;

/// Independent edges `x -> y` with probability `p`, drawn on demand.
pub struct IidEdges<'r> {
    p: f64,
    rng: &'r mut ChaCha8Rng,
    seen: HashMap<(i64, i64), bool>,
}

impl<'r> IidEdges<'r> {
    pub fn new(p: f64, rng: &'r mut ChaCha8Rng) -> Self {
        Self { p, rng, seen: HashMap::new() }
    }

    pub fn edge(&mut self, x: i64, y: i64) -> bool {
        let (p, rng) = (self.p, &mut *self.rng);
        *self.seen.entry((x, y)).or_insert_with(|| rng.random::<f64>() < p)
    }

    /// Every vertex of `(-j, 0]` has an in-neighbour in `[-j, y)`.
    pub fn forward_event(&mut self, j: i64) -> bool {
        (-j + 1..=0).all(|y| (-j..y).any(|x| self.edge(x, y)))
    }

    /// First `i > 0` whose row has no edge into `(-i, 0]`, up to the horizon.
    pub fn mu(&mut self) -> Option<i64> {
        (1..=HORIZON).find(|&i| !(-i + 1..=0).any(|y| self.edge(-i, y)))
    }
}

/// Draws `ψ_1 + ψ_2 + ... + ψ_K` with `K` geometric, `ψ_1` distributed as `ν`
/// and later terms as the first forward event past a finite `μ`.
pub struct CompositionOracle {
    p: f64,
    a: f64,
    rng: ChaCha8Rng,
}

impl CompositionOracle {
    pub fn new(p: f64, rng: ChaCha8Rng) -> Self {
        Self { p, a: lambda_product(p).sqrt(), rng }
    }

    fn nu(&mut self) -> i64 {
        let mut world = ChaCha8Rng::from_rng_seed(&mut self.rng);
        let mut e = IidEdges::new(self.p, &mut world);
        (1..).find(|&n| e.forward_event(n)).expect("unbounded search")
    }

    fn psi(&mut self) -> i64 {
        loop {
            let mut world = ChaCha8Rng::from_rng_seed(&mut self.rng);
            let mut e = IidEdges::new(self.p, &mut world);
            if let Some(mu) = e.mu() {
                return (mu + 1..).find(|&j| e.forward_event(j)).expect("unbounded search");
            }
        }
    }

    pub fn sample(&mut self) -> i64 {
        let mut total = self.nu();
        while self.rng.random::<f64>() >= self.a {
            total += self.psi();
        }
        total
    }
}

trait FromRngSeed {
    fn from_rng_seed(rng: &mut ChaCha8Rng) -> Self;
}

impl FromRngSeed for ChaCha8Rng {
    fn from_rng_seed(rng: &mut ChaCha8Rng) -> Self {
        use rand::SeedableRng;
        ChaCha8Rng::from_seed(rng.random())
    }
}

/// Every vertex of `(u, o]` has an in-neighbour in `[u, y)`.
pub fn forward(e: &mut IidEdges, u: i64, o: i64) -> bool {
    (u + 1..=o).all(|y| (u..y).any(|x| e.edge(x, y)))
}

/// First row below `b` with no edge into `(r, b]`, up to the horizon.
pub fn violation(e: &mut IidEdges, b: i64) -> Option<i64> {
    (1..=HORIZON).map(|i| b - i).find(|&r| !(r + 1..=b).any(|y| e.edge(r, y)))
}

/// Distance from `o` to the silver point of the recursion started at `o`.
pub fn silver_from(e: &mut IidEdges, o: i64) -> i64 {
    let mut v = (1..).map(|k| o - k).find(|&u| forward(e, u, o)).expect("unbounded search");
    while let Some(m) = violation(e, v) {
        let prev = v;
        v = (1..).map(|k| m - k).find(|&u| forward(e, u, prev)).expect("unbounded search");
    }
    o - v
}
