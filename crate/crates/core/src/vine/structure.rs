//! Vine tree sequences, their validity checks and the vine-array encoding.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VineKind {
    RVine,
    CVine,
    DVine,
}

impl VineKind {
    pub const ALL: [VineKind; 3] = [VineKind::RVine, VineKind::CVine, VineKind::DVine];

    pub fn name(self) -> &'static str {
        match self {
            VineKind::RVine => "rvine",
            VineKind::CVine => "cvine",
            VineKind::DVine => "dvine",
        }
    }
}

impl fmt::Display for VineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rvine" => Ok(VineKind::RVine),
            "cvine" => Ok(VineKind::CVine),
            "dvine" => Ok(VineKind::DVine),
            other => Err(Error::ConfigError(format!("unknown vine kind '{other}'"))),
        }
    }
}

/// Edge `{a, b | D}`: the pair copula of `(F(a|D), F(b|D))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VineEdge {
    pub conditioned: [usize; 2],
    pub conditioning: Vec<usize>,
}

impl VineEdge {
    pub fn new(a: usize, b: usize, mut conditioning: Vec<usize>) -> Self {
        conditioning.sort_unstable();
        VineEdge { conditioned: [a, b], conditioning }
    }

    /// Conditioned and conditioning variables together, sorted.
    pub fn full_set(&self) -> Vec<usize> {
        let mut s = self.conditioning.clone();
        s.extend(self.conditioned);
        s.sort_unstable();
        s
    }

    pub(crate) fn key(&self) -> (usize, usize, Vec<usize>) {
        let [a, b] = self.conditioned;
        (a.min(b), a.max(b), self.conditioning.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineStructure {
    pub kind: VineKind,
    pub dim: usize,
    /// `trees[k]` holds the `dim − 1 − k` edges of tree `k + 1`.
    pub trees: Vec<Vec<VineEdge>>,
}

/// Variables in sampling order, each with its partners in trees 1, 2, …
#[derive(Debug, Clone)]
pub(crate) struct Ordering {
    pub order: Vec<usize>,
    pub partners: Vec<Vec<usize>>,
}

impl VineStructure {
    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(format!("invalid vine: {m}")));
        let n = self.dim;
        if n < 2 {
            return bad(format!("dimension {n} is below 2"));
        }
        if self.trees.len() != n - 1 {
            return bad(format!("{} trees for dimension {n}", self.trees.len()));
        }
        let mut sets: Vec<HashSet<Vec<usize>>> = Vec::new();
        for (k, tree) in self.trees.iter().enumerate() {
            if tree.len() != n - 1 - k {
                return bad(format!("tree {} has {} edges, expected {}", k + 1, tree.len(), n - 1 - k));
            }
            let mut here = HashSet::new();
            for e in tree {
                let [a, b] = e.conditioned;
                let full = e.full_set();
                if e.conditioning.len() != k || full.iter().any(|&v| v >= n) || full.windows(2).any(|w| w[0] == w[1]) || a == b {
                    return bad(format!("edge {e:?} is malformed for tree {}", k + 1));
                }
                if k > 0 {
                    let without = |x: usize| full.iter().copied().filter(|&v| v != x).collect::<Vec<_>>();
                    if !sets[k - 1].contains(&without(a)) || !sets[k - 1].contains(&without(b)) {
                        return bad(format!("edge {e:?} does not join two edges of tree {}", k));
                    }
                    if k > 1 && !sets[k - 2].contains(&e.conditioning) {
                        return bad(format!("edge {e:?} violates the proximity condition"));
                    }
                }
                here.insert(full);
            }
            if here.len() != tree.len() {
                return bad(format!("tree {} repeats an edge", k + 1));
            }
            sets.push(here);
        }
        self.ordering().map(|_| ())
    }

    /// Peels variables off the top tree. Each peeled variable appears in
    /// exactly one conditioned set per remaining tree, which yields the
    /// columns of the vine array.
    pub(crate) fn ordering(&self) -> Result<Ordering> {
        let n = self.dim;
        let mut alive: Vec<Vec<bool>> = self.trees.iter().map(|t| vec![true; t.len()]).collect();
        let mut peeled = Vec::with_capacity(n);
        let mut columns = Vec::with_capacity(n);
        for s in 0..n - 1 {
            let top = n - 2 - s;
            let live: Vec<usize> = (0..self.trees[top].len()).filter(|&i| alive[top][i]).collect();
            if live.len() != 1 {
                return Err(Error::InvalidParameters("invalid vine: top tree is not a single edge".into()));
            }
            let x = self.trees[top][live[0]].conditioned[0];
            let mut partners = Vec::with_capacity(top + 1);
            for (j, tree) in self.trees.iter().enumerate().take(top + 1) {
                let hits: Vec<usize> =
                    (0..tree.len()).filter(|&i| alive[j][i] && tree[i].conditioned.contains(&x)).collect();
                let [i] = hits[..] else {
                    return Err(Error::InvalidParameters(format!("invalid vine: variable {x} is not a leaf of tree {}", j + 1)));
                };
                let e = &tree[i];
                let mut seen = partners.clone();
                seen.sort_unstable();
                if e.conditioning != seen {
                    return Err(Error::InvalidParameters(format!("invalid vine: edge {e:?} breaks the array order")));
                }
                partners.push(if e.conditioned[0] == x { e.conditioned[1] } else { e.conditioned[0] });
                alive[j][i] = false;
            }
            peeled.push(x);
            columns.push(partners);
        }
        let last = (0..n).find(|v| !peeled.contains(v)).expect("one variable remains");
        let mut order = vec![last];
        let mut partners = vec![Vec::new()];
        for s in (0..n - 1).rev() {
            order.push(peeled[s]);
            partners.push(columns[s].clone());
        }
        Ok(Ordering { order, partners })
    }

    /// Lower-triangular vine array: column `s` has the variable peeled at
    /// step `s` on the diagonal and its tree-`j` partner in row `dim − j`.
    pub fn matrix(&self) -> Result<Vec<Vec<Option<usize>>>> {
        let n = self.dim;
        let o = self.ordering()?;
        let mut m = vec![vec![None; n]; n];
        // column s corresponds to order[n - 1 - s]
        for s in 0..n {
            let k = n - 1 - s;
            m[s][s] = Some(o.order[k]);
            for (j, &p) in o.partners[k].iter().enumerate() {
                m[n - 1 - j][s] = Some(p);
            }
        }
        Ok(m)
    }

    /// Rebuilds the tree sequence from a vine array.
    pub fn from_matrix(kind: VineKind, m: &[Vec<Option<usize>>]) -> Result<Self> {
        let n = m.len();
        let bad = || Error::InvalidParameters("malformed vine array".into());
        if n < 2 || m.iter().any(|r| r.len() != n) {
            return Err(bad());
        }
        let mut trees = vec![Vec::new(); n - 1];
        for s in 0..n - 1 {
            let x = m[s][s].ok_or_else(bad)?;
            let partners: Vec<usize> = (0..n - 1 - s).map(|j| m[n - 1 - j][s].ok_or_else(bad)).collect::<Result<_>>()?;
            for (j, &p) in partners.iter().enumerate() {
                trees[j].push(VineEdge::new(x, p, partners[..j].to_vec()));
            }
        }
        let s = VineStructure { kind, dim: n, trees };
        s.validate()?;
        Ok(s)
    }
}
