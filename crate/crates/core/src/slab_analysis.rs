//! Hasse diagrams of the level poset and the decomposition of slab longest
//! paths into per-level cycle sums along Hasse paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::{SlabGraph, SlabWindowGraph};
use crate::longest_path::slab_longest_free;
use crate::poset::Poset;
use crate::skeleton_scan::{scan_slab_skeleton, SlabSkeletonReport};
use crate::stats::{self, Estimate};

pub const MAX_LEVELS: usize = 8;
pub const MAX_PATHS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HasseDiagram {
    pub covers: Vec<(usize, usize)>,
    /// Every cover path from the minimum to the maximum.
    pub paths: Vec<Vec<usize>>,
}

impl HasseDiagram {
    /// Number of edges on the longest enumerated path.
    pub fn longest_path_len(&self) -> usize {
        self.paths.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }
}

pub fn build_hasse(p: &Poset) -> Result<HasseDiagram> {
    let n = p.len();
    if n > MAX_LEVELS {
        return Err(Error::PosetInvalid(format!("{n} levels exceed the limit of {MAX_LEVELS}")));
    }
    let covers: Vec<(usize, usize)> = p
        .strict_pairs()
        .into_iter()
        .filter(|&(i, j)| !(0..n).any(|k| k != i && k != j && p.leq(i, k) && p.leq(k, j)))
        .collect();
    let mut paths = Vec::new();
    let mut stack = vec![vec![p.min_element()]];
    while let Some(path) = stack.pop() {
        let last = *path.last().expect("paths are nonempty");
        if last == p.max_element() {
            paths.push(path);
            if paths.len() > MAX_PATHS {
                return Err(Error::PosetInvalid(format!("more than {MAX_PATHS} Hasse paths")));
            }
            continue;
        }
        for &(i, j) in covers.iter().rev() {
            if i == last {
                let mut next = path.clone();
                next.push(j);
                stack.push(next);
            }
        }
    }
    Ok(HasseDiagram { covers, paths })
}

/// `L*(ι)` over the cycles `cycles` (indices into `level_lengths[i]`): the best
/// split of consecutive cycles into stages run on `ι_0, ι_1, ...` in order.
pub fn l_star_path(level_lengths: &[Vec<u32>], path: &[usize], cycles: std::ops::Range<usize>) -> u32 {
    let mut best = vec![0u32; path.len()];
    for c in cycles {
        for (k, &lvl) in path.iter().enumerate() {
            let stay = best[k] + level_lengths[lvl][c];
            best[k] = if k == 0 { stay } else { stay.max(best[k - 1]) };
        }
        // a switch at the end point is free
        for k in 1..path.len() {
            best[k] = best[k].max(best[k - 1]);
        }
    }
    *best.last().expect("paths are nonempty")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LStar {
    pub total: u32,
    pub per_path: Vec<u32>,
}

pub fn l_star(level_lengths: &[Vec<u32>], h: &HasseDiagram, cycles: std::ops::Range<usize>) -> LStar {
    let per_path: Vec<u32> = h.paths.iter().map(|p| l_star_path(level_lengths, p, cycles.clone())).collect();
    LStar { total: per_path.iter().copied().max().unwrap_or(0), per_path }
}

/// `ζ_n = Σ_i max_j L⁽ⁱ⁾[Γ_j, Γ_{j+1}]` over the cycles given.
pub fn zeta(level_lengths: &[Vec<u32>], cycles: std::ops::Range<usize>) -> u32 {
    level_lengths.iter().map(|ls| ls[cycles.clone()].iter().copied().max().unwrap_or(0)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichVerdict {
    pub n: (i64, i64),
    /// Skeleton points inside `[lo, hi]`.
    pub phi: usize,
    pub l_n: u32,
    pub l_star: u32,
    pub zeta_n: u32,
    /// Longest Hasse path length, the count of level changes a path can make.
    pub additive: usize,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl SandwichVerdict {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

/// Compares `L_n` on `[lo, hi]` with its bounds. The skeleton is read from the
/// whole window, which must also contain a point before `lo` and one after `hi`.
pub fn sandwich_check(
    g: &SlabWindowGraph,
    (lo, hi): (i64, i64),
    buffer: u64,
    h: &HasseDiagram,
) -> Result<SandwichVerdict> {
    let rep = scan_slab_skeleton(g, buffer)?;
    sandwich_from_report(g, &rep, (lo, hi), h)
}

pub fn sandwich_from_report<S: SlabGraph + ?Sized>(
    g: &S,
    rep: &SlabSkeletonReport,
    (lo, hi): (i64, i64),
    h: &HasseDiagram,
) -> Result<SandwichVerdict> {
    let pts = &rep.report.points;
    let first = pts.partition_point(|&p| p < lo);
    let end = pts.partition_point(|&p| p <= hi);
    let phi = end - first;
    if phi == 0 || first == 0 || end == pts.len() {
        return Err(Error::TooFewSkeletonPoints { found: phi, needed: 1 });
    }
    let sub = SubSlab { g, lo, hi };
    let l_n = slab_longest_free(&sub, false).length;
    // cycle k joins pts[k] and pts[k+1]
    let inner = first..end - 1;
    let l_star = l_star(&rep.level_lengths, h, inner).total;
    let zeta_n = zeta(&rep.level_lengths, first - 1..end);
    let additive = h.longest_path_len();
    Ok(SandwichVerdict {
        n: (lo, hi),
        phi,
        l_n,
        l_star,
        zeta_n,
        additive,
        lower_holds: l_star <= l_n,
        upper_holds: l_n as usize <= zeta_n as usize + additive + l_star as usize,
    })
}

struct SubSlab<'a, S: ?Sized> {
    g: &'a S,
    lo: i64,
    hi: i64,
}

impl<S: SlabGraph + ?Sized> SlabGraph for SubSlab<'_, S> {
    fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    fn levels(&self) -> &Poset {
        self.g.levels()
    }

    fn has_edge(&self, u: (i64, usize), v: (i64, usize)) -> bool {
        self.g.has_edge(u, v)
    }
}

/// `κ²` from slab cycles: the skeleton rate times the per-level variance of
/// `L⁽ⁱ⁾ cycle - C·gap`, pooled over levels.
pub fn kappa2(reports: &[SlabSkeletonReport], c: f64) -> Result<Estimate> {
    let n_points: usize = reports.iter().map(|r| r.report.points.len()).sum();
    let core: usize = reports.iter().map(|r| r.report.core_len()).sum();
    let rate = n_points as f64 / core as f64;
    let mut resid = Vec::new();
    for r in reports {
        for ls in &r.level_lengths {
            for (len, cy) in ls.iter().zip(&r.report.cycles) {
                resid.push((*len as f64 - c * cy.gap as f64).powi(2));
            }
        }
    }
    if resid.len() < crate::regen_stats::MIN_CYCLES {
        return Err(Error::TooFewCycles { found: resid.len(), needed: crate::regen_stats::MIN_CYCLES });
    }
    let v = stats::mean_se(&resid)?;
    Ok(Estimate { value: rate * v.value, se: rate * v.se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_gen::sample_slab_window;
    use crate::prob_model::{EdgeProbabilityModel, SlabProbabilityModel};
    use crate::stream::SeedTag;
    use proptest::prelude::*;

    /// Exhaustive split enumeration for a chain.
    fn chain_brute(level_lengths: &[Vec<u32>], cycles: usize) -> u32 {
        let levels = level_lengths.len();
        let mut best = 0;
        let mut splits = vec![0usize; levels - 1];
        loop {
            let mut total = 0;
            let mut from = 0;
            for (k, &to) in splits.iter().chain(std::iter::once(&cycles)).enumerate() {
                total += level_lengths[k][from..to].iter().sum::<u32>();
                from = to;
            }
            best = best.max(total);
            // next nondecreasing split vector
            let mut k = levels - 1;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if splits[k] < cycles {
                    splits[k] += 1;
                    let v = splits[k];
                    for s in splits.iter_mut().skip(k + 1) {
                        *s = v;
                    }
                    break;
                }
            }
        }
    }

    fn reduction_oracle(p: &Poset) -> Vec<(usize, usize)> {
        let n = p.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if p.lt(i, j) && !(0..n).any(|k| p.lt(i, k) && p.lt(k, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn chain_and_diamond_hasse() {
        let h = build_hasse(&Poset::chain(2)).unwrap();
        assert_eq!(h.covers, vec![(0, 1), (1, 2)]);
        assert_eq!(h.paths, vec![vec![0, 1, 2]]);
        let h = build_hasse(&Poset::diamond()).unwrap();
        assert_eq!(h.paths.len(), 2);
        assert!(h.paths.contains(&vec![0, 1, 3]) && h.paths.contains(&vec![0, 2, 3]));
        assert_eq!(h.longest_path_len(), 2);
    }

    #[test]
    fn too_many_levels_is_rejected() {
        assert!(matches!(build_hasse(&Poset::chain(8)), Err(Error::PosetInvalid(_))));
    }

    proptest! {
        #[test]
        fn covers_match_transitive_reduction(extra in proptest::collection::vec((1usize..5, 1usize..5), 0..8)) {
            // 0 below everything, 5 above everything, random order among 1..=4 by index
            let mut covers: Vec<(usize, usize)> = (1..5).flat_map(|i| [(0, i), (i, 5)]).collect();
            covers.extend(extra.into_iter().filter(|(a, b)| a < b));
            let names = (0..6).map(|i| i.to_string()).collect();
            let p = Poset::from_covers(names, &covers).unwrap();
            let h = build_hasse(&p).unwrap();
            prop_assert_eq!(h.covers, reduction_oracle(&p));
            for path in &h.paths {
                prop_assert_eq!(path[0], 0);
                prop_assert_eq!(*path.last().unwrap(), 5);
            }
        }

        #[test]
        fn chain_l_star_matches_split_enumeration(
            levels in 1usize..4,
            data in proptest::collection::vec(0u32..6, 36),
            cycles in 0usize..12,
        ) {
            let ll: Vec<Vec<u32>> = (0..levels).map(|i| data[i * 12..i * 12 + 12].to_vec()).collect();
            let h = build_hasse(&Poset::chain(levels - 1)).unwrap();
            prop_assert_eq!(l_star(&ll, &h, 0..cycles).total, chain_brute(&ll, cycles));
        }

        #[test]
        fn l_star_is_monotone(data in proptest::collection::vec(0u32..6, 24)) {
            let ll = vec![data[..12].to_vec(), data[12..].to_vec()];
            let h = build_hasse(&Poset::chain(1)).unwrap();
            for n in 0..12 {
                prop_assert!(l_star(&ll, &h, 0..n).total <= l_star(&ll, &h, 0..n + 1).total);
            }
        }
    }

    #[test]
    fn single_level_l_star_is_the_cycle_sum() {
        let ll = vec![vec![3, 1, 4, 1, 5]];
        let h = build_hasse(&Poset::chain(0)).unwrap();
        assert_eq!(l_star(&ll, &h, 0..5).total, 14);
        assert_eq!(zeta(&ll, 0..5), 5);
    }

    #[test]
    fn diamond_is_max_of_its_chains() {
        let ll = vec![vec![1, 2, 3], vec![5, 0, 0], vec![0, 0, 6], vec![1, 1, 1]];
        let h = build_hasse(&Poset::diamond()).unwrap();
        let s = l_star(&ll, &h, 0..3);
        let a = chain_brute(&[ll[0].clone(), ll[1].clone(), ll[3].clone()], 3);
        let b = chain_brute(&[ll[0].clone(), ll[2].clone(), ll[3].clone()], 3);
        assert_eq!(s.total, a.max(b));
    }

    #[test]
    fn sandwich_holds_on_samples() {
        let base = EdgeProbabilityModel::constant(0.5).unwrap();
        let m = SlabProbabilityModel::new(base, Poset::chain(1), 1.0, 0.0).unwrap();
        let h = build_hasse(&m.poset).unwrap();
        let mut checked = 0;
        for r in 0..20 {
            let g = sample_slab_window(&m, -1500, 3500, SeedTag::new(70, r)).unwrap();
            match sandwich_check(&g, (0, 2000), 20, &h) {
                Ok(v) => {
                    assert!(v.holds(), "{v:?}");
                    checked += 1;
                }
                Err(Error::TooFewSkeletonPoints { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(checked >= 15);
    }
}
