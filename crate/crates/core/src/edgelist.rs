//! Plain-text edge lists.
//!
//! ```text
//! # slablab edge list v1
//! # model 1f2e3d4c5b6a7988
//! # window 0 10
//! # levels 2
//! # seed 7 0
//! 0 0 1 0
//! 0 0 0 1
//! ```
//!
//! Line graphs omit the `levels` header and write `x y` per edge.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph_gen::{slab_edges, DenseWindowGraph, LineGraph, SlabGraph, SlabVertex};
use crate::stream::SeedTag;

const MAGIC: &str = "# slablab edge list v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub model_hash: String,
    pub window: (i64, i64),
    /// `None` for line graphs.
    pub levels: Option<usize>,
    pub seed: Option<SeedTag>,
    pub edges: Vec<(SlabVertex, SlabVertex)>,
}

impl EdgeList {
    pub fn from_line<G: LineGraph + ?Sized>(g: &G, model_hash: &str, seed: Option<SeedTag>) -> Self {
        let (a, b) = g.window();
        let mut edges = Vec::new();
        for x in a..b {
            for y in x + 1..=b {
                if g.has_edge(x, y) {
                    edges.push(((x, 0), (y, 0)));
                }
            }
        }
        Self { model_hash: model_hash.to_string(), window: (a, b), levels: None, seed, edges }
    }

    pub fn from_slab<S: SlabGraph + ?Sized>(g: &S, model_hash: &str, seed: Option<SeedTag>) -> Self {
        Self {
            model_hash: model_hash.to_string(),
            window: g.window(),
            levels: Some(g.levels().len()),
            seed,
            edges: slab_edges(g),
        }
    }

    pub fn to_line_graph(&self) -> Result<DenseWindowGraph> {
        if self.levels.is_some() {
            return Err(Error::GraphFormat { line: 0, reason: "slab edge list read as a line graph".into() });
        }
        let edges: Vec<_> = self.edges.iter().map(|&((x, _), (y, _))| (x, y)).collect();
        let mut g = DenseWindowGraph::from_edges(self.window.0, self.window.1, &edges)?;
        g.seed = self.seed;
        g.model_hash = Some(self.model_hash.clone());
        Ok(g)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "# model {}", self.model_hash);
        let _ = writeln!(s, "# window {} {}", self.window.0, self.window.1);
        if let Some(l) = self.levels {
            let _ = writeln!(s, "# levels {l}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed {} {}", seed.stream, seed.replication);
        }
        for &((x, i), (y, j)) in &self.edges {
            if self.levels.is_some() {
                let _ = writeln!(s, "{x} {i} {y} {j}");
            } else {
                let _ = writeln!(s, "{x} {y}");
            }
        }
        s
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.render().as_bytes())?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::GraphFormat { line, reason: reason.to_string() };
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(l))) if l.trim_end() == MAGIC => {}
            _ => return Err(bad(1, "missing edge-list header")),
        }
        let mut model_hash = None;
        let mut window = None;
        let mut levels = None;
        let mut seed = None;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let n = idx + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let nums = |rest: &str| -> Result<Vec<i64>> {
                rest.split_whitespace()
                    .map(|t| t.parse::<i64>().map_err(|_| bad(n, &format!("`{t}` is not an integer"))))
                    .collect()
            };
            if let Some(h) = line.strip_prefix('#') {
                let mut parts = h.trim().splitn(2, ' ');
                let key = parts.next().unwrap_or("");
                let rest = parts.next().unwrap_or("").trim();
                match key {
                    "model" => model_hash = Some(rest.to_string()),
                    "window" => match nums(rest)?.as_slice() {
                        &[a, b] if a <= b => window = Some((a, b)),
                        _ => return Err(bad(n, "window needs two ordered integers")),
                    },
                    "levels" => match nums(rest)?.as_slice() {
                        &[l] if l >= 1 => levels = Some(l as usize),
                        _ => return Err(bad(n, "levels needs one positive integer")),
                    },
                    "seed" => match nums(rest)?.as_slice() {
                        &[s, r] => seed = Some(SeedTag::new(s as u64, r as u64)),
                        _ => return Err(bad(n, "seed needs stream and replication")),
                    },
                    _ => return Err(bad(n, &format!("unknown header `{key}`"))),
                }
                continue;
            }
            let (a, b) = window.ok_or_else(|| bad(n, "edge before window header"))?;
            let v = nums(line)?;
            let edge = match (levels, v.as_slice()) {
                (None, &[x, y]) => ((x, 0), (y, 0)),
                (Some(l), &[x, i, y, j]) if i >= 0 && j >= 0 && (i as usize) < l && (j as usize) < l => {
                    ((x, i as usize), (y, j as usize))
                }
                _ => return Err(bad(n, "wrong number of fields or level out of range")),
            };
            let ((x, i), (y, j)) = edge;
            if x < a || y > b || y < x || (x, i) == (y, j) || (levels.is_none() && x == y) {
                return Err(bad(n, "edge outside the window or not increasing"));
            }
            edges.push(edge);
        }
        Ok(Self {
            model_hash: model_hash.ok_or_else(|| bad(0, "missing model header"))?,
            window: window.ok_or_else(|| bad(0, "missing window header"))?,
            levels,
            seed,
            edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_gen::{sample_slab_window, sample_window};
    use crate::poset::Poset;
    use crate::prob_model::{EdgeProbabilityModel, SlabProbabilityModel};

    #[test]
    fn line_round_trip_is_bit_exact() {
        let m = EdgeProbabilityModel::constant(0.4).unwrap();
        let seed = SeedTag::new(12, 4);
        let g = sample_window(&m, -5, 30, seed).unwrap();
        let list = EdgeList::from_line(&g, &m.model_hash(), Some(seed));
        let text = list.render();
        let back = EdgeList::read(text.as_bytes()).unwrap();
        assert_eq!(back, list);
        assert_eq!(back.render(), text);
        let dense = back.to_line_graph().unwrap();
        for x in -5..30 {
            for y in x + 1..=30 {
                assert_eq!(dense.has_edge(x, y), g.has_edge(x, y));
            }
        }
    }

    #[test]
    fn slab_round_trip() {
        let m = SlabProbabilityModel::new(EdgeProbabilityModel::constant(0.5).unwrap(), Poset::chain(2), 0.5, 0.2)
            .unwrap();
        let seed = SeedTag::new(13, 0);
        let g = sample_slab_window(&m, 0, 12, seed).unwrap();
        let list = EdgeList::from_slab(&g, &m.base.model_hash(), Some(seed));
        let back = EdgeList::read(list.render().as_bytes()).unwrap();
        assert_eq!(back, list);
        assert!(back.to_line_graph().is_err());
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(EdgeList::read("nope\n".as_bytes()).is_err());
        let text = format!("{MAGIC}\n# model x\n# window 0 3\n2 1\n");
        let err = EdgeList::read(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::GraphFormat { line: 4, .. }));
        let text = format!("{MAGIC}\n# model x\n# window 0 3\n0 q\n");
        assert!(EdgeList::read(text.as_bytes()).is_err());
    }
}
