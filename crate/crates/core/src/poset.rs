//! Finite partially ordered level sets with a unique minimum and maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite poset stored as its reflexive order matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poset {
    names: Vec<String>,
    leq: Vec<Vec<bool>>,
    min: usize,
    max: usize,
    extension: Vec<usize>,
}

impl Poset {
    /// Builds the order generated by `covers` (pairs `i ≺ j`) by reflexive-transitive closure.
    pub fn from_covers(names: Vec<String>, covers: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(i, j) in covers {
            if i >= n || j >= n {
                return Err(Error::PosetInvalid(format!("cover ({i}, {j}) names an unknown element")));
            }
            leq[i][j] = true;
        }
        // Warshall
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        Self::from_relation(names, leq)
    }

    /// Validates an explicit order matrix.
    pub fn from_relation(names: Vec<String>, leq: Vec<Vec<bool>>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::PosetInvalid("no elements".into()));
        }
        if leq.len() != n || leq.iter().any(|r| r.len() != n) {
            return Err(Error::PosetInvalid("relation matrix has the wrong shape".into()));
        }
        for i in 0..n {
            if !leq[i][i] {
                return Err(Error::PosetInvalid(format!("relation is not reflexive at {}", names[i])));
            }
            for j in 0..n {
                if i != j && leq[i][j] && leq[j][i] {
                    return Err(Error::PosetInvalid(format!(
                        "{} and {} precede each other",
                        names[i], names[j]
                    )));
                }
                for k in 0..n {
                    if leq[i][j] && leq[j][k] && !leq[i][k] {
                        return Err(Error::PosetInvalid(format!(
                            "transitivity fails for {}, {}, {}",
                            names[i], names[j], names[k]
                        )));
                    }
                }
            }
        }
        let mins: Vec<usize> = (0..n).filter(|&i| (0..n).all(|j| leq[i][j])).collect();
        let maxs: Vec<usize> = (0..n).filter(|&j| (0..n).all(|i| leq[i][j])).collect();
        let (&[min], &[max]) = (mins.as_slice(), maxs.as_slice()) else {
            return Err(Error::PosetInvalid("no unique minimum and maximum".into()));
        };
        // Linear extension: by number of strict predecessors, ties by index.
        let mut extension: Vec<usize> = (0..n).collect();
        extension.sort_by_key(|&j| ((0..n).filter(|&i| leq[i][j]).count(), j));
        Ok(Self { names, leq, min, max, extension })
    }

    /// The chain `0 ≺ 1 ≺ ... ≺ top`.
    pub fn chain(top: usize) -> Self {
        let names = (0..=top).map(|i| i.to_string()).collect();
        let covers: Vec<_> = (0..top).map(|i| (i, i + 1)).collect();
        Self::from_covers(names, &covers).expect("chains are valid")
    }

    /// `{0, a, b, M}` with `a`, `b` incomparable.
    pub fn diamond() -> Self {
        let names = ["0", "a", "b", "M"].map(String::from).to_vec();
        Self::from_covers(names, &[(0, 1), (0, 2), (1, 3), (2, 3)]).expect("diamond is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.leq[i][j]
    }

    pub fn lt(&self, i: usize, j: usize) -> bool {
        i != j && self.leq[i][j]
    }

    pub fn min_element(&self) -> usize {
        self.min
    }

    pub fn max_element(&self) -> usize {
        self.max
    }

    /// A fixed linear extension used for DP order and tie-breaking.
    pub fn linear_extension(&self) -> &[usize] {
        &self.extension
    }

    /// Position of each element in [`Poset::linear_extension`].
    pub fn extension_rank(&self) -> Vec<usize> {
        let mut rank = vec![0; self.len()];
        for (r, &e) in self.extension.iter().enumerate() {
            rank[e] = r;
        }
        rank
    }

    /// All strictly ordered pairs `i ≺ j`.
    pub fn strict_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| self.lt(i, j)).collect()
    }
}
