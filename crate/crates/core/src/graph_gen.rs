//! Realized windows of the line graph on `ℤ` and the slab graph on `ℤ × I`.
//!
//! Edges are never stored for sampled windows. Each indicator is a pure hash
//! of `(stream, source, gap, levels)`, so a window of any placement is
//! reproducible, the shift is an offset on the source index, and level 0 of a
//! slab coincides with the line graph drawn from the same seed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poset::Poset;
use crate::prob_model::{EdgeProbabilityModel, SlabProbabilityModel};
use crate::stream::{absorb, Purpose, SeedTag};

/// Default cap on `(window vertices)²`, in adjacency bits.
pub const DEFAULT_ADJACENCY_BUDGET: u64 = 1 << 34;

pub type SlabVertex = (i64, usize);

/// Threshold `t` with `unit_f64(key) < p ⇔ key >> 11 < t`.
fn threshold(p: f64) -> u64 {
    (p * (1u64 << 53) as f64).ceil() as u64
}

/// Counter-based edge indicators for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeField {
    key: u64,
    offset: i64,
}

impl EdgeField {
    pub fn new(seed: SeedTag) -> Self {
        Self { key: seed.key(Purpose::Edges), offset: 0 }
    }

    /// The field of `θ^by ω`: `α(θω)_{x,y} = α(ω)_{x+1,y+1}`.
    pub fn shift(self, by: i64) -> Self {
        Self { offset: self.offset + by, ..self }
    }

    #[inline]
    fn bits(&self, x: i64, gap: u64, i: usize, j: usize) -> u64 {
        absorb(self.key, &[(x + self.offset) as u64, gap, i as u64, j as u64]) >> 11
    }
}

fn check_budget(a: i64, b: i64, levels: usize, budget: u64) -> Result<u64> {
    if a > b {
        return Err(Error::InvalidPair(format!("window [{a}, {b}] is empty")));
    }
    let vertices = (b - a + 1) as u64 * levels as u64;
    if vertices.saturating_mul(vertices) > budget {
        return Err(Error::WindowTooLarge { vertices, budget });
    }
    Ok(vertices)
}

/// Nearest neighbour inside the window, or a marker that it may lie outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighbour {
    At(i64),
    BeyondWindow,
}

impl Neighbour {
    pub fn get(self) -> Option<i64> {
        match self {
            Neighbour::At(v) => Some(v),
            Neighbour::BeyondWindow => None,
        }
    }
}

/// A realized graph on the window `[a, b]` of the line.
pub trait LineGraph: Sync {
    fn window(&self) -> (i64, i64);

    /// `α_{x,y} = 1`; only meaningful for `a <= x < y <= b`.
    fn has_edge(&self, x: i64, y: i64) -> bool;

    fn contains(&self, x: i64) -> bool {
        let (a, b) = self.window();
        (a..=b).contains(&x)
    }

    /// `ξ̄(j)`: the nearest in-neighbour of `j` inside the window.
    fn nearest_in(&self, j: i64) -> Neighbour {
        let (a, _) = self.window();
        (a..j).rev().find(|&i| self.has_edge(i, j)).map_or(Neighbour::BeyondWindow, Neighbour::At)
    }

    /// `η̄(j)`: the nearest out-neighbour of `j` inside the window.
    fn nearest_out(&self, j: i64) -> Neighbour {
        let (_, b) = self.window();
        (j + 1..=b).find(|&k| self.has_edge(j, k)).map_or(Neighbour::BeyondWindow, Neighbour::At)
    }
}

impl<G: LineGraph + ?Sized> LineGraph for &G {
    fn window(&self) -> (i64, i64) {
        (**self).window()
    }

    fn has_edge(&self, x: i64, y: i64) -> bool {
        (**self).has_edge(x, y)
    }
}

/// A lazily evaluated sample of the line graph on `[a, b]`.
#[derive(Debug, Clone)]
pub struct WindowGraph {
    a: i64,
    b: i64,
    seed: SeedTag,
    field: EdgeField,
    model: Arc<EdgeProbabilityModel>,
    thresholds: Arc<[u64]>,
}

/// Samples the line graph on `[a, b]` with the default adjacency budget.
pub fn sample_window(model: &EdgeProbabilityModel, a: i64, b: i64, seed: SeedTag) -> Result<WindowGraph> {
    sample_window_with_budget(model, a, b, seed, DEFAULT_ADJACENCY_BUDGET)
}

pub fn sample_window_with_budget(
    model: &EdgeProbabilityModel,
    a: i64,
    b: i64,
    seed: SeedTag,
    budget: u64,
) -> Result<WindowGraph> {
    check_budget(a, b, 1, budget)?;
    let thresholds: Arc<[u64]> = (0..=(b - a)).map(|k| threshold(model.p(k))).collect();
    Ok(WindowGraph {
        a,
        b,
        seed,
        field: EdgeField::new(seed),
        model: Arc::new(model.clone()),
        thresholds,
    })
}

impl WindowGraph {
    pub fn seed(&self) -> SeedTag {
        self.seed
    }

    pub fn model(&self) -> &EdgeProbabilityModel {
        &self.model
    }

    pub fn field(&self) -> EdgeField {
        self.field
    }

    pub fn len(&self) -> usize {
        (self.b - self.a + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same sample seen on a subwindow (no resampling).
    pub fn restrict(&self, a: i64, b: i64) -> Result<WindowGraph> {
        if a < self.a || b > self.b || a > b {
            return Err(Error::InvalidPair(format!(
                "[{a}, {b}] is not a subwindow of [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(WindowGraph { a, b, ..self.clone() })
    }

    /// The window `[a, b]` of the shifted configuration `θ^by ω`.
    pub fn shifted(&self, by: i64) -> WindowGraph {
        WindowGraph { field: self.field.shift(by), ..self.clone() }
    }

    /// Materializes the adjacency as bitset rows.
    pub fn to_dense(&self, budget: u64) -> Result<DenseWindowGraph> {
        check_budget(self.a, self.b, 1, budget)?;
        let mut g = DenseWindowGraph::empty(self.a, self.b);
        for x in self.a..self.b {
            for y in x + 1..=self.b {
                if self.has_edge(x, y) {
                    g.insert(x, y);
                }
            }
        }
        g.seed = Some(self.seed);
        g.model_hash = Some(self.model.model_hash());
        Ok(g)
    }
}

impl LineGraph for WindowGraph {
    fn window(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    #[inline]
    fn has_edge(&self, x: i64, y: i64) -> bool {
        debug_assert!(self.a <= x && x < y && y <= self.b);
        let gap = (y - x) as u64;
        self.field.bits(x, gap, 0, 0) < self.thresholds[gap as usize]
    }
}

/// An explicitly stored line graph, one bitset row per source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseWindowGraph {
    a: i64,
    b: i64,
    rows: Vec<Vec<u64>>,
    pub seed: Option<SeedTag>,
    pub model_hash: Option<String>,
}

impl DenseWindowGraph {
    pub fn empty(a: i64, b: i64) -> Self {
        let n = (b - a + 1).max(0) as usize;
        let words = n.div_ceil(64);
        Self { a, b, rows: vec![vec![0; words]; n], seed: None, model_hash: None }
    }

    pub fn from_edges(a: i64, b: i64, edges: &[(i64, i64)]) -> Result<Self> {
        let mut g = Self::empty(a, b);
        for &(x, y) in edges {
            if !(a <= x && x < y && y <= b) {
                return Err(Error::InvalidPair(format!("edge ({x}, {y}) outside window [{a}, {b}]")));
            }
            g.insert(x, y);
        }
        Ok(g)
    }

    pub fn insert(&mut self, x: i64, y: i64) {
        let (r, c) = ((x - self.a) as usize, (y - self.a) as usize);
        self.rows[r][c / 64] |= 1 << (c % 64);
    }

    pub fn edges(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for (w, &word) in row.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let c = w * 64 + bits.trailing_zeros() as usize;
                    out.push((self.a + r as i64, self.a + c as i64));
                    bits &= bits - 1;
                }
            }
        }
        out
    }
}

impl LineGraph for DenseWindowGraph {
    fn window(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    fn has_edge(&self, x: i64, y: i64) -> bool {
        let (r, c) = ((x - self.a) as usize, (y - self.a) as usize);
        self.rows[r][c / 64] >> (c % 64) & 1 == 1
    }
}

/// ξ̄ and η̄ for every vertex of a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XiEtaProfile {
    pub a: i64,
    pub xi_bar: Vec<Neighbour>,
    pub eta_bar: Vec<Neighbour>,
}

pub fn xi_eta_profile<G: LineGraph + ?Sized>(g: &G) -> XiEtaProfile {
    let (a, b) = g.window();
    XiEtaProfile {
        a,
        xi_bar: (a..=b).map(|j| g.nearest_in(j)).collect(),
        eta_bar: (a..=b).map(|j| g.nearest_out(j)).collect(),
    }
}

/// A realized graph on `[a, b] × I`.
pub trait SlabGraph: Sync {
    fn window(&self) -> (i64, i64);

    fn levels(&self) -> &Poset;

    /// `α_{(x,i),(y,j)} = 1`; only meaningful for `(x,i) ⋘ (y,j)` inside the window.
    fn has_edge(&self, u: SlabVertex, v: SlabVertex) -> bool;
}

/// A lazily evaluated sample of the slab graph.
#[derive(Debug, Clone)]
pub struct SlabWindowGraph {
    a: i64,
    b: i64,
    seed: SeedTag,
    field: EdgeField,
    model: Arc<SlabProbabilityModel>,
    diagonal: Arc<[u64]>,
    vertical: u64,
    lateral: u64,
}

pub fn sample_slab_window(model: &SlabProbabilityModel, a: i64, b: i64, seed: SeedTag) -> Result<SlabWindowGraph> {
    sample_slab_window_with_budget(model, a, b, seed, DEFAULT_ADJACENCY_BUDGET)
}

pub fn sample_slab_window_with_budget(
    model: &SlabProbabilityModel,
    a: i64,
    b: i64,
    seed: SeedTag,
    budget: u64,
) -> Result<SlabWindowGraph> {
    check_budget(a, b, model.poset.len(), budget)?;
    let diagonal: Arc<[u64]> = (0..=(b - a)).map(|k| threshold(model.base.p(k))).collect();
    // vertical may equal 1; the threshold 2^53 then accepts every key
    Ok(SlabWindowGraph {
        a,
        b,
        seed,
        field: EdgeField::new(seed),
        model: Arc::new(model.clone()),
        diagonal,
        vertical: threshold(model.vertical),
        lateral: threshold(model.lateral),
    })
}

impl SlabWindowGraph {
    pub fn seed(&self) -> SeedTag {
        self.seed
    }

    pub fn model(&self) -> &SlabProbabilityModel {
        &self.model
    }

    pub fn restrict(&self, a: i64, b: i64) -> Result<SlabWindowGraph> {
        if a < self.a || b > self.b || a > b {
            return Err(Error::InvalidPair(format!(
                "[{a}, {b}] is not a subwindow of [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(SlabWindowGraph { a, b, ..self.clone() })
    }

    /// The level-`i` line graph `G⁽ⁱ⁾`.
    pub fn level(&self, i: usize) -> LevelView<'_, Self> {
        LevelView { slab: self, level: i }
    }
}

impl SlabGraph for SlabWindowGraph {
    fn window(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    fn levels(&self) -> &Poset {
        &self.model.poset
    }

    #[inline]
    fn has_edge(&self, (x, i): SlabVertex, (y, j): SlabVertex) -> bool {
        if y < x || !self.model.poset.leq(i, j) || (x == y && i == j) {
            return false;
        }
        let gap = (y - x) as u64;
        let t = if i == j {
            self.diagonal[gap as usize]
        } else if gap == 0 {
            self.vertical
        } else {
            self.lateral
        };
        self.field.bits(x, gap, i, j) < t
    }
}

/// One level of a slab graph, viewed as a line graph.
#[derive(Debug, Clone, Copy)]
pub struct LevelView<'a, S: SlabGraph> {
    slab: &'a S,
    level: usize,
}

impl<S: SlabGraph> LineGraph for LevelView<'_, S> {
    fn window(&self) -> (i64, i64) {
        self.slab.window()
    }

    fn has_edge(&self, x: i64, y: i64) -> bool {
        self.slab.has_edge((x, self.level), (y, self.level))
    }
}

/// A line graph seen as a slab with a single level.
#[derive(Debug, Clone)]
pub struct SingleLevel<G> {
    pub graph: G,
    poset: Poset,
}

impl<G: LineGraph> SingleLevel<G> {
    pub fn new(graph: G) -> Self {
        Self { graph, poset: Poset::chain(0) }
    }
}

impl<G: LineGraph> SlabGraph for SingleLevel<G> {
    fn window(&self) -> (i64, i64) {
        self.graph.window()
    }

    fn levels(&self) -> &Poset {
        &self.poset
    }

    fn has_edge(&self, (x, _): SlabVertex, (y, _): SlabVertex) -> bool {
        x < y && self.graph.has_edge(x, y)
    }
}

/// An explicitly stored slab graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseSlabGraph {
    a: i64,
    b: i64,
    poset: Poset,
    edges: std::collections::HashSet<(SlabVertex, SlabVertex)>,
}

impl DenseSlabGraph {
    pub fn from_edges(a: i64, b: i64, poset: Poset, edges: &[(SlabVertex, SlabVertex)]) -> Result<Self> {
        for &((x, i), (y, j)) in edges {
            let ok = a <= x && y <= b && x <= y && i < poset.len() && j < poset.len() && poset.leq(i, j) && (x, i) != (y, j);
            if !ok {
                return Err(Error::InvalidPair(format!("edge ({x},{i}) -> ({y},{j}) is not admissible")));
            }
        }
        Ok(Self { a, b, poset, edges: edges.iter().copied().collect() })
    }
}

impl SlabGraph for DenseSlabGraph {
    fn window(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    fn levels(&self) -> &Poset {
        &self.poset
    }

    fn has_edge(&self, u: SlabVertex, v: SlabVertex) -> bool {
        self.edges.contains(&(u, v))
    }
}

/// All edges of a slab window in `(x, rank)` order of the source, then target.
pub fn slab_edges<S: SlabGraph + ?Sized>(g: &S) -> Vec<(SlabVertex, SlabVertex)> {
    let (a, b) = g.window();
    let poset = g.levels();
    let ext = poset.linear_extension();
    let mut out = Vec::new();
    for x in a..=b {
        for &i in ext {
            for y in x..=b {
                for &j in ext {
                    if (x, i) != (y, j) && poset.leq(i, j) && g.has_edge((x, i), (y, j)) {
                        out.push(((x, i), (y, j)));
                    }
                }
            }
        }
    }
    out
}
