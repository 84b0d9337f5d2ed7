//! Skeleton points of realized windows and the regenerative cycles between them.
//!
//! A core vertex `n` is reported when every window vertex left of `n` has its
//! nearest out-neighbour at most `n` and every window vertex right of `n` has
//! its nearest in-neighbour at least `n`. The window condition is implied by
//! the infinite one, so reports can only err by including a point whose
//! defect lies outside the window; `ε(B)` bounds the probability of that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::{xi_eta_profile, LineGraph, Neighbour, SlabGraph, SlabWindowGraph};
use crate::longest_path::{longest_free, longest_pinned, prefix_lengths, slab_longest_free};
use crate::prob_model::EdgeProbabilityModel;

/// Largest buffer [`buffer_for`] will consider.
const MAX_BUFFER: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: i64,
    pub end: i64,
    pub gap: i64,
    /// `L[start, end]`.
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonReport {
    pub points: Vec<i64>,
    pub cycles: Vec<Cycle>,
    pub buffer: u64,
    /// Bound on the probability that some reported point is not a skeleton point.
    pub eps: f64,
    /// Trusted core `[lo, hi]`.
    pub core: (i64, i64),
}

impl SkeletonReport {
    pub fn core_len(&self) -> usize {
        (self.core.1 - self.core.0 + 1) as usize
    }

    pub fn rate(&self) -> f64 {
        self.points.len() as f64 / self.core_len() as f64
    }

    /// Largest reported point `<= x`.
    pub fn last_at_or_before(&self, x: i64) -> Option<i64> {
        let k = self.points.partition_point(|&p| p <= x);
        k.checked_sub(1).map(|k| self.points[k])
    }
}

/// `ε(B)` for a core of `core_len` points: the expected number of defects
/// outside the window, `2 Σ_{n in core} Σ_{m > n-a} Q(m) <= 2 Σ_{m>B} (m-B) Q(m)`.
pub fn miss_bound(model: &EdgeProbabilityModel, buffer: u64, core_len: u64) -> f64 {
    let Some(tail) = model.tail_sum_after(buffer) else { return 1.0 };
    let per_window = 2.0 * core_len as f64 * (tail.value + tail.abs_err);
    // Σ_{m>B} (m-B) Q(m) = Σ_{m>B} m Q(m) - B Σ_{m>B} Q(m)
    let weighted = match model.weighted_tail_sum_after(buffer) {
        Some(w) => 2.0 * (w.value + w.abs_err - buffer as f64 * (tail.value - tail.abs_err)),
        None => f64::INFINITY,
    };
    per_window.min(weighted.max(0.0)).min(1.0)
}

/// Smallest buffer with `ε(B) <= eps`.
pub fn buffer_for(model: &EdgeProbabilityModel, eps: f64, core_len: u64) -> Result<u64> {
    let mut lo = 0u64;
    let mut hi = 1u64;
    while miss_bound(model, hi, core_len) > eps {
        lo = hi;
        hi *= 2;
        if hi > MAX_BUFFER {
            return Err(Error::BufferTooSmall { buffer: MAX_BUFFER, eps: miss_bound(model, MAX_BUFFER, core_len), ceiling: eps });
        }
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if miss_bound(model, mid, core_len) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(if miss_bound(model, lo, core_len) <= eps { lo } else { hi })
}

/// Window-certified skeleton points of any line graph over the core `[a+B, b-B]`.
pub fn window_points<G: LineGraph + ?Sized>(g: &G, buffer: u64) -> Result<(Vec<i64>, (i64, i64))> {
    let (a, b) = g.window();
    let core = (a + buffer as i64, b - buffer as i64);
    if core.0 > core.1 {
        return Err(Error::InvalidPair(format!(
            "window [{a}, {b}] is not larger than twice the buffer {buffer}"
        )));
    }
    let prof = xi_eta_profile(g);
    let n = prof.xi_bar.len();
    // sup over i < n of η̄(i); a missing out-neighbour counts as +∞
    let mut left = vec![i64::MIN; n + 1];
    for k in 0..n {
        let e = prof.eta_bar[k].get().unwrap_or(i64::MAX);
        left[k + 1] = left[k].max(e);
    }
    // inf over j > n of ξ̄(j); a missing in-neighbour counts as -∞
    let mut right = vec![i64::MAX; n + 1];
    for k in (0..n).rev() {
        let x = prof.xi_bar[k].get().unwrap_or(i64::MIN);
        right[k] = right[k + 1].min(x);
    }
    let points = (core.0..=core.1)
        .filter(|&v| {
            let k = (v - a) as usize;
            left[k] <= v && v <= right[k + 1]
        })
        .collect();
    Ok((points, core))
}

fn cycles_between<G: LineGraph + ?Sized>(g: &G, points: &[i64]) -> Vec<Cycle> {
    let wide = SubWindow { g, lo: 0, hi: 0 };
    points
        .windows(2)
        .map(|w| {
            let sub = SubWindow { lo: w[0], hi: w[1], ..wide };
            Cycle { start: w[0], end: w[1], gap: w[1] - w[0], length: longest_free(&sub, false).length }
        })
        .collect()
}

/// A view of `[lo, hi]` inside another line graph.
#[derive(Clone, Copy)]
pub struct SubWindow<'a, G: ?Sized> {
    pub g: &'a G,
    pub lo: i64,
    pub hi: i64,
}

impl<G: LineGraph + ?Sized> LineGraph for SubWindow<'_, G> {
    fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    fn has_edge(&self, x: i64, y: i64) -> bool {
        self.g.has_edge(x, y)
    }
}

/// Scans a line window with the given buffer and no ceiling on `ε(B)`.
pub fn scan_skeleton<G: LineGraph + ?Sized>(g: &G, model: &EdgeProbabilityModel, buffer: u64) -> Result<SkeletonReport> {
    scan_skeleton_with_ceiling(g, model, buffer, 1.0)
}

pub fn scan_skeleton_with_ceiling<G: LineGraph + ?Sized>(
    g: &G,
    model: &EdgeProbabilityModel,
    buffer: u64,
    ceiling: f64,
) -> Result<SkeletonReport> {
    let (points, core) = window_points(g, buffer)?;
    let eps = miss_bound(model, buffer, (core.1 - core.0 + 1) as u64);
    if eps > ceiling {
        return Err(Error::BufferTooSmall { buffer, eps, ceiling });
    }
    let cycles = cycles_between(g, &points);
    Ok(SkeletonReport { points, cycles, buffer, eps, core })
}

/// Per-level cycle lengths for the slab skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSkeletonReport {
    /// Points and slab cycle lengths.
    pub report: SkeletonReport,
    /// `level_lengths[i][k] = L⁽ⁱ⁾[Γ_k, Γ_{k+1}]`.
    pub level_lengths: Vec<Vec<u32>>,
}

/// Intersects the level skeletons and keeps columns carrying every vertical edge.
pub fn scan_slab_skeleton(g: &SlabWindowGraph, buffer: u64) -> Result<SlabSkeletonReport> {
    let model = g.model();
    if !model.vertical_condition() {
        return Err(Error::ConditionViolation("some vertical probability r(0, i, j) with i ≺ j is zero".into()));
    }
    let poset = &model.poset;
    let levels = poset.len();
    let mut common: Option<Vec<i64>> = None;
    let mut core = (0, 0);
    for i in 0..levels {
        let (pts, c) = window_points(&g.level(i), buffer)?;
        core = c;
        common = Some(match common {
            None => pts,
            Some(prev) => prev.into_iter().filter(|x| pts.binary_search(x).is_ok()).collect(),
        });
    }
    let pairs = poset.strict_pairs();
    let points: Vec<i64> = common
        .unwrap_or_default()
        .into_iter()
        .filter(|&x| pairs.iter().all(|&(i, j)| g.has_edge((x, i), (x, j))))
        .collect();
    let eps = (levels as f64 * miss_bound(&model.base, buffer, (core.1 - core.0 + 1) as u64)).min(1.0);
    let cycles = points
        .windows(2)
        .map(|w| {
            let sub = g.restrict(w[0], w[1]).expect("points lie in the window");
            Cycle { start: w[0], end: w[1], gap: w[1] - w[0], length: slab_longest_free(&sub, false).length }
        })
        .collect();
    let level_lengths = (0..levels).map(|i| cycles_between(&g.level(i), &points).iter().map(|c| c.length).collect()).collect();
    Ok(SlabSkeletonReport { report: SkeletonReport { points, cycles, buffer, eps, core }, level_lengths })
}

/// `u` reaches every vertex of `(u, v]` by explicit search inside `[u, v]`.
pub fn reaches_all<G: LineGraph + ?Sized>(g: &G, u: i64, v: i64) -> bool {
    let n = (v - u + 1) as usize;
    let mut seen = vec![false; n];
    seen[0] = true;
    for y in u + 1..=v {
        seen[(y - u) as usize] = (u..y).any(|x| seen[(x - u) as usize] && g.has_edge(x, y));
    }
    seen.iter().all(|&s| s)
}

/// Every vertex of `[u, v)` reaches `v` by explicit search inside `[u, v]`.
pub fn all_reach<G: LineGraph + ?Sized>(g: &G, u: i64, v: i64) -> bool {
    let n = (v - u + 1) as usize;
    let mut hits = vec![false; n];
    hits[n - 1] = true;
    for x in (u..v).rev() {
        hits[(x - u) as usize] = (x + 1..=v).any(|y| hits[(y - u) as usize] && g.has_edge(x, y));
    }
    hits.iter().all(|&h| h)
}

/// `ξ(u+k) <= k` for `k = 1..=v-u`, with `ξ` read inside `[u, v]`.
pub fn forward_product<G: LineGraph + ?Sized>(g: &G, u: i64, v: i64) -> bool {
    let sub = SubWindow { g, lo: u, hi: v };
    (u + 1..=v).all(|w| matches!(sub.nearest_in(w), Neighbour::At(i) if i >= u))
}

/// `η(v-k) <= k` for `k = 1..=v-u`, with `η` read inside `[u, v]`.
pub fn backward_product<G: LineGraph + ?Sized>(g: &G, u: i64, v: i64) -> bool {
    let sub = SubWindow { g, lo: u, hi: v };
    (u..v).all(|w| matches!(sub.nearest_out(w), Neighbour::At(k) if k <= v))
}

/// Both reachability events agree with their neighbour-product forms.
pub fn verify_reachability_equivalence<G: LineGraph + ?Sized>(g: &G, u: i64, v: i64) -> bool {
    reaches_all(g, u, v) == forward_product(g, u, v) && all_reach(g, u, v) == backward_product(g, u, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStatistics {
    pub pairs: Vec<(i64, u32)>,
    /// `T[Γ_i, Γ_{i+1}] = L[Γ_i, Γ_{i+1}]` on every cycle.
    pub pinned_equals_free: bool,
}

pub fn cycle_statistics<G: LineGraph + ?Sized>(report: &SkeletonReport, g: &G) -> Result<CycleStatistics> {
    if report.points.len() < 2 {
        return Err(Error::TooFewSkeletonPoints { found: report.points.len(), needed: 2 });
    }
    let mut ok = true;
    for c in &report.cycles {
        let t = longest_pinned(g, c.start, c.end, false)?.length;
        ok &= t == c.length;
    }
    Ok(CycleStatistics { pairs: report.cycles.iter().map(|c| (c.gap, c.length)).collect(), pinned_equals_free: ok })
}

/// `L[Γ_first, Γ_k]` equals the sum of the first cycles, at every reported point.
/// Returns the number of cycles checked and the first failing point, if any.
pub fn check_block_additivity<G: LineGraph + ?Sized>(g: &G, report: &SkeletonReport) -> (usize, Option<i64>) {
    let (Some(&first), Some(&last)) = (report.points.first(), report.points.last()) else {
        return (0, None);
    };
    let pre = prefix_lengths(&SubWindow { g, lo: first, hi: last });
    let mut acc = 0u32;
    for c in &report.cycles {
        acc += c.length;
        if pre[(c.end - first) as usize] != acc {
            return (report.cycles.len(), Some(c.end));
        }
    }
    (report.cycles.len(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_gen::{sample_slab_window, sample_window, DenseWindowGraph};
    use crate::poset::Poset;
    use crate::prob_model::SlabProbabilityModel;
    use crate::stream::SeedTag;

    fn model(p: f64) -> EdgeProbabilityModel {
        EdgeProbabilityModel::constant(p).unwrap()
    }

    #[test]
    fn miss_bound_for_half() {
        // 2 Σ_{m>B} (m-B) 2^-m = 4 · 2^-B
        let m = model(0.5);
        for b in [4u64, 10, 20] {
            let e = miss_bound(&m, b, 1_000_000);
            assert!((e - 4.0 * 0.5f64.powi(b as i32)).abs() < 1e-12, "B={b} e={e}");
        }
        let b = buffer_for(&m, 1e-6, 100_000).unwrap();
        assert!(miss_bound(&m, b, 100_000) <= 1e-6 && miss_bound(&m, b - 1, 100_000) > 1e-6);
        assert_eq!(b, 22);
    }

    #[test]
    fn ceiling_is_enforced() {
        let m = model(0.5);
        let g = sample_window(&m, 0, 100, SeedTag::new(1, 0)).unwrap();
        let err = scan_skeleton_with_ceiling(&g, &m, 2, 1e-6).unwrap_err();
        assert!(matches!(err, Error::BufferTooSmall { buffer: 2, .. }));
        assert!(scan_skeleton(&g, &m, 60).is_err());
    }

    #[test]
    fn empty_graph_has_no_points() {
        let g = DenseWindowGraph::from_edges(0, 40, &[]).unwrap();
        let r = scan_skeleton(&g, &model(0.5), 5).unwrap();
        assert!(r.points.is_empty());
    }

    #[test]
    fn dense_graph_rate() {
        let m = model(0.999);
        let lam = m.skeleton_rate(1e-12).unwrap().value;
        let g = sample_window(&m, 0, 20_000, SeedTag::new(30, 0)).unwrap();
        let b = buffer_for(&m, 1e-9, 20_000).unwrap();
        let r = scan_skeleton(&g, &m, b).unwrap();
        let n = r.core_len() as f64;
        assert!((r.rate() - lam).abs() < 3.0 * (lam * (1.0 - lam) / n).sqrt() + 1e-3);
    }

    #[test]
    fn reported_points_satisfy_window_condition() {
        let m = model(0.5);
        let g = sample_window(&m, 0, 300, SeedTag::new(31, 0)).unwrap();
        let r = scan_skeleton(&g, &m, 20).unwrap();
        assert!(!r.points.is_empty());
        for &n in &r.points {
            assert!(forward_product(&g, n, 300) && reaches_all(&g, n, 300));
            assert!(backward_product(&g, 0, n) && all_reach(&g, 0, n));
        }
        // and the converse on the core
        for n in r.core.0..=r.core.1 {
            let direct = reaches_all(&g, n, 300) && all_reach(&g, 0, n);
            assert_eq!(direct, r.points.binary_search(&n).is_ok(), "n={n}");
        }
    }

    #[test]
    fn reachability_equivalence_small_windows() {
        let m = model(0.5);
        for r in 0..30 {
            let b = 5 + (r % 25) as i64;
            let g = sample_window(&m, 0, b, SeedTag::new(32, r)).unwrap();
            for u in 0..b {
                for v in u + 1..=b {
                    assert!(verify_reachability_equivalence(&g, u, v));
                }
            }
        }
        let g = DenseWindowGraph::from_edges(0, 3, &[(0, 1)]).unwrap();
        assert!(reaches_all(&g, 0, 1) && forward_product(&g, 0, 1));
        let e = DenseWindowGraph::from_edges(0, 3, &[]).unwrap();
        assert!(!reaches_all(&e, 0, 2) && !forward_product(&e, 0, 2));
    }

    #[test]
    fn cycles_additive_and_pinned() {
        let m = model(0.5);
        let g = sample_window(&m, 0, 5000, SeedTag::new(33, 0)).unwrap();
        let r = scan_skeleton(&g, &m, 30).unwrap();
        let stats = cycle_statistics(&r, &g).unwrap();
        assert!(stats.pinned_equals_free);
        assert_eq!(check_block_additivity(&g, &r).1, None);
        assert!(r.cycles.len() > 100);
        let mean_gap = r.cycles.iter().map(|c| c.gap as f64).sum::<f64>() / r.cycles.len() as f64;
        assert!((mean_gap - 1.0 / 0.0834).abs() < 2.5);
    }

    #[test]
    fn skeleton_points_lie_on_a_maximal_witness() {
        let m = model(0.5);
        let g = sample_window(&m, 0, 800, SeedTag::new(34, 0)).unwrap();
        let r = scan_skeleton(&g, &m, 25).unwrap();
        let (lo, hi) = (r.points[0], *r.points.last().unwrap());
        let sub = SubWindow { g: &g, lo, hi };
        let w = longest_free(&sub, true).line_witness().unwrap();
        for p in &r.points {
            assert!(w.contains(p));
        }
    }

    #[test]
    fn slab_skeleton_reductions() {
        let base = model(0.5);
        let seed = SeedTag::new(35, 0);
        let single = SlabProbabilityModel::new(base.clone(), Poset::chain(0), 1.0, 0.0).unwrap();
        let sg = sample_slab_window(&single, 0, 3000, seed).unwrap();
        let lg = sample_window(&base, 0, 3000, seed).unwrap();
        let a = scan_slab_skeleton(&sg, 20).unwrap();
        let b = scan_skeleton(&lg, &base, 20).unwrap();
        assert_eq!(a.report.points, b.points);
        assert_eq!(a.report.cycles, b.cycles);

        let zero = SlabProbabilityModel::new(base.clone(), Poset::chain(1), 0.0, 0.2).unwrap();
        let zg = sample_slab_window(&zero, 0, 100, seed).unwrap();
        assert!(matches!(scan_slab_skeleton(&zg, 10), Err(Error::ConditionViolation(_))));
    }

    #[test]
    fn slab_rate_is_thinned_square() {
        let base = model(0.7);
        let lam = base.skeleton_rate(1e-12).unwrap().value;
        for (vertical, factor) in [(1.0, 1.0), (0.5, 0.5)] {
            let m = SlabProbabilityModel::new(base.clone(), Poset::chain(1), vertical, 0.3).unwrap();
            let mut pts = 0usize;
            let mut len = 0usize;
            for r in 0..4 {
                let g = sample_slab_window(&m, 0, 30_000, SeedTag::new(36, r)).unwrap();
                let rep = scan_slab_skeleton(&g, 25).unwrap();
                pts += rep.report.points.len();
                len += rep.report.core_len();
                assert_eq!(rep.level_lengths.len(), 2);
            }
            let target = lam * lam * factor;
            let rate = pts as f64 / len as f64;
            // renewal counts are positively dependent at short range; allow for it
            assert!((rate - target).abs() < 4.0 * (target / len as f64).sqrt() + 2e-3, "{rate} vs {target}");
        }
    }
}
