//! Longest paths `L[a,b]`, `T[u,v]` and prefix maxima by dynamic programming.
//!
//! Vertices are processed in topological order and kept in buckets by their
//! DP value. A new vertex probes the buckets from the highest value down and
//! stops at the first in-neighbour found, which is then a maximiser. Within a
//! bucket the latest vertex is probed first, giving the tie-break towards the
//! largest index (then the highest rank in the fixed linear extension).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::{LineGraph, SlabGraph, SlabVertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    /// Endpoint-pinned (`T`).
    Pinned,
    /// Free endpoints (`L`).
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathResult {
    pub length: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<SlabVertex>>,
    pub kind: PathKind,
}

impl PathResult {
    /// Witness positions with levels dropped.
    pub fn line_witness(&self) -> Option<Vec<i64>> {
        self.witness.as_ref().map(|w| w.iter().map(|v| v.0).collect())
    }
}

/// Vertices in topological order plus the edge relation between them.
trait Indexed {
    fn count(&self) -> usize;
    fn edge(&self, u: usize, v: usize) -> bool;
    fn vertex(&self, idx: usize) -> SlabVertex;
}

struct LineIdx<'a, G: ?Sized> {
    g: &'a G,
    a: i64,
    n: usize,
}

impl<'a, G: LineGraph + ?Sized> LineIdx<'a, G> {
    fn new(g: &'a G) -> Self {
        let (a, b) = g.window();
        Self { g, a, n: (b - a + 1) as usize }
    }
}

impl<G: LineGraph + ?Sized> Indexed for LineIdx<'_, G> {
    fn count(&self) -> usize {
        self.n
    }

    #[inline]
    fn edge(&self, u: usize, v: usize) -> bool {
        self.g.has_edge(self.a + u as i64, self.a + v as i64)
    }

    fn vertex(&self, idx: usize) -> SlabVertex {
        (self.a + idx as i64, 0)
    }
}

struct SlabIdx<'a, S: ?Sized> {
    g: &'a S,
    a: i64,
    columns: usize,
    ext: Vec<usize>,
    rank: Vec<usize>,
}

impl<'a, S: SlabGraph + ?Sized> SlabIdx<'a, S> {
    fn new(g: &'a S) -> Self {
        let (a, b) = g.window();
        let poset = g.levels();
        Self {
            g,
            a,
            columns: (b - a + 1) as usize,
            ext: poset.linear_extension().to_vec(),
            rank: poset.extension_rank(),
        }
    }

    fn index(&self, (x, i): SlabVertex) -> usize {
        (x - self.a) as usize * self.ext.len() + self.rank[i]
    }
}

impl<S: SlabGraph + ?Sized> Indexed for SlabIdx<'_, S> {
    fn count(&self) -> usize {
        self.columns * self.ext.len()
    }

    #[inline]
    fn edge(&self, u: usize, v: usize) -> bool {
        self.g.has_edge(self.vertex(u), self.vertex(v))
    }

    fn vertex(&self, idx: usize) -> SlabVertex {
        let l = self.ext.len();
        (self.a + (idx / l) as i64, self.ext[idx % l])
    }
}

const NONE: u32 = u32::MAX;

struct Dp {
    /// Longest path ending at each vertex; `NONE` when unreachable (pinned mode).
    value: Vec<u32>,
    back: Vec<u32>,
}

/// Bucket DP. With `start = Some(s)` only paths from `s` count, over indices `s..=until`.
fn run_dp<I: Indexed>(g: &I, start: Option<usize>, until: usize) -> Dp {
    let n = g.count();
    let mut value = vec![NONE; n];
    let mut back = vec![NONE; n];
    let mut buckets: Vec<Vec<u32>> = Vec::new();
    let from = start.unwrap_or(0);
    for v in from..=until.min(n.saturating_sub(1)) {
        if n == 0 {
            break;
        }
        let mut found = None;
        'outer: for (d, bucket) in buckets.iter().enumerate().rev() {
            for &u in bucket.iter().rev() {
                if g.edge(u as usize, v) {
                    found = Some((d as u32 + 1, u));
                    break 'outer;
                }
            }
        }
        let d = match (found, start) {
            (Some((d, u)), _) => {
                back[v] = u;
                d
            }
            (None, None) => 0,
            (None, Some(s)) if s == v => 0,
            (None, Some(_)) => continue,
        };
        value[v] = d;
        if buckets.len() <= d as usize {
            buckets.resize_with(d as usize + 1, Vec::new);
        }
        buckets[d as usize].push(v as u32);
    }
    Dp { value, back }
}

fn trace<I: Indexed>(g: &I, dp: &Dp, end: usize) -> Vec<SlabVertex> {
    let mut path = vec![g.vertex(end)];
    let mut cur = end;
    while dp.back[cur] != NONE {
        cur = dp.back[cur] as usize;
        path.push(g.vertex(cur));
    }
    path.reverse();
    path
}

fn free<I: Indexed>(g: &I, witness: bool) -> PathResult {
    if g.count() == 0 {
        return PathResult { length: 0, witness: witness.then(Vec::new), kind: PathKind::Free };
    }
    let dp = run_dp(g, None, g.count() - 1);
    let mut best = 0usize;
    for (v, &d) in dp.value.iter().enumerate() {
        if d >= dp.value[best] {
            best = v;
        }
    }
    PathResult { length: dp.value[best], witness: witness.then(|| trace(g, &dp, best)), kind: PathKind::Free }
}

fn pinned<I: Indexed>(g: &I, u: usize, v: usize, witness: bool) -> PathResult {
    let dp = run_dp(g, Some(u), v);
    match dp.value[v] {
        NONE => PathResult { length: 0, witness: witness.then(Vec::new), kind: PathKind::Pinned },
        d => PathResult { length: d, witness: witness.then(|| trace(g, &dp, v)), kind: PathKind::Pinned },
    }
}

/// `L[a,b]` for the whole window.
pub fn longest_free<G: LineGraph + ?Sized>(g: &G, witness: bool) -> PathResult {
    free(&LineIdx::new(g), witness)
}

/// `T[u,v]`; length 0 with an empty witness when `v` is unreachable from `u`.
pub fn longest_pinned<G: LineGraph + ?Sized>(g: &G, u: i64, v: i64, witness: bool) -> Result<PathResult> {
    let (a, b) = g.window();
    if !(a <= u && u <= v && v <= b) {
        return Err(Error::InvalidPair(format!("({u}, {v}) is not an ordered pair in [{a}, {b}]")));
    }
    Ok(pinned(&LineIdx::new(g), (u - a) as usize, (v - a) as usize, witness))
}

/// `T[u, y]` for every `y` in `[u, b]`; `None` when unreachable.
pub fn pinned_from<G: LineGraph + ?Sized>(g: &G, u: i64) -> Result<Vec<Option<u32>>> {
    let (a, b) = g.window();
    if !(a..=b).contains(&u) {
        return Err(Error::InvalidPair(format!("{u} is outside [{a}, {b}]")));
    }
    let idx = LineIdx::new(g);
    let dp = run_dp(&idx, Some((u - a) as usize), idx.count() - 1);
    Ok(dp.value[(u - a) as usize..].iter().map(|&d| (d != NONE).then_some(d)).collect())
}

/// `L[a, a+n]` for `n = 0..=b-a`.
pub fn prefix_lengths<G: LineGraph + ?Sized>(g: &G) -> Vec<u32> {
    let idx = LineIdx::new(g);
    let dp = run_dp(&idx, None, idx.count() - 1);
    running_max(dp.value.iter().copied(), 1)
}

fn running_max(values: impl Iterator<Item = u32>, group: usize) -> Vec<u32> {
    let values: Vec<u32> = values.collect();
    let mut out = Vec::with_capacity(values.len() / group);
    let mut best = 0;
    for chunk in values.chunks(group) {
        best = chunk.iter().copied().fold(best, u32::max);
        out.push(best);
    }
    out
}

/// The slab `L_n` over the whole window.
pub fn slab_longest_free<S: SlabGraph + ?Sized>(g: &S, witness: bool) -> PathResult {
    free(&SlabIdx::new(g), witness)
}

/// `T[u,v]` in the slab; `u` must precede `v` component-wise.
pub fn slab_longest_pinned<S: SlabGraph + ?Sized>(
    g: &S,
    u: SlabVertex,
    v: SlabVertex,
    witness: bool,
) -> Result<PathResult> {
    let (a, b) = g.window();
    let poset = g.levels();
    let inside = |(x, i): SlabVertex| a <= x && x <= b && i < poset.len();
    if !(inside(u) && inside(v) && u.0 <= v.0 && poset.leq(u.1, v.1)) {
        return Err(Error::InvalidPair(format!("{u:?} does not precede {v:?} in the slab window")));
    }
    let idx = SlabIdx::new(g);
    Ok(pinned(&idx, idx.index(u), idx.index(v), witness))
}

/// Slab `L[a, a+n]` for `n = 0..=b-a`.
pub fn slab_prefix_lengths<S: SlabGraph + ?Sized>(g: &S) -> Vec<u32> {
    let idx = SlabIdx::new(g);
    let dp = run_dp(&idx, None, idx.count() - 1);
    running_max(dp.value.iter().copied(), idx.ext.len())
}

/// Checks that a witness is an increasing path of edges of the stated length.
pub fn check_witness<S: SlabGraph + ?Sized>(g: &S, result: &PathResult) -> bool {
    let Some(w) = &result.witness else { return true };
    if w.is_empty() {
        return result.length == 0;
    }
    w.len() == result.length as usize + 1 && w.windows(2).all(|p| g.has_edge(p[0], p[1]))
}

/// Exhaustive path enumeration, for validation on tiny windows.
pub mod oracle {
    use super::*;

    /// Vertex cap; enumeration visits at most `2^MAX_VERTICES` paths.
    pub const MAX_VERTICES: usize = 18;

    fn vertices<S: SlabGraph + ?Sized>(g: &S) -> Result<Vec<SlabVertex>> {
        let (a, b) = g.window();
        let levels = g.levels().len();
        let count = (b - a + 1) as usize * levels;
        if count > MAX_VERTICES {
            return Err(Error::WindowTooLarge { vertices: count as u64, budget: MAX_VERTICES as u64 });
        }
        Ok((a..=b).flat_map(|x| (0..levels).map(move |i| (x, i))).collect())
    }

    /// Longest path length from `u` ending anywhere (`None`) or at `target`;
    /// `None` when no such path exists.
    fn dfs<S: SlabGraph + ?Sized>(g: &S, vs: &[SlabVertex], u: SlabVertex, target: Option<SlabVertex>) -> Option<u32> {
        let mut best = match target {
            Some(t) if t != u => None,
            _ => Some(0),
        };
        for &w in vs {
            if w != u && w.0 >= u.0 && g.levels().leq(u.1, w.1) && g.has_edge(u, w) {
                if let Some(d) = dfs(g, vs, w, target) {
                    best = Some(best.map_or(d + 1, |b: u32| b.max(d + 1)));
                }
            }
        }
        best
    }

    pub fn slab_free<S: SlabGraph + ?Sized>(g: &S) -> Result<u32> {
        let vs = vertices(g)?;
        Ok(vs.iter().filter_map(|&u| dfs(g, &vs, u, None)).max().unwrap_or(0))
    }

    pub fn slab_pinned<S: SlabGraph + ?Sized>(g: &S, u: SlabVertex, v: SlabVertex) -> Result<u32> {
        let vs = vertices(g)?;
        Ok(dfs(g, &vs, u, Some(v)).unwrap_or(0))
    }

    pub fn line_free<G: LineGraph>(g: &G) -> Result<u32> {
        slab_free(&crate::graph_gen::SingleLevel::new(g))
    }

    pub fn line_pinned<G: LineGraph>(g: &G, u: i64, v: i64) -> Result<u32> {
        slab_pinned(&crate::graph_gen::SingleLevel::new(g), (u, 0), (v, 0))
    }
}
