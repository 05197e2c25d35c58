//! Sequential tree-by-tree structure selection and estimation.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::pair::{fit_pair_family, select_pair, PairCopula, PairFamily, PairFit};
use super::structure::{VineEdge, VineKind, VineStructure};
use super::{FittedEdge, VineModel};
use crate::copulas::MIN_COPULA_OBS;
use crate::error::{Error, Result};
use crate::stats::{column, kendall_tau};

type Key = (usize, Vec<usize>);

/// Conditional pseudo-observation columns `F(a | S)`, computed on demand
/// from the edges fitted so far.
struct Columns {
    data: HashMap<Key, Arc<Vec<f64>>>,
    fitted: HashMap<(usize, usize, Vec<usize>), (VineEdge, PairCopula)>,
}

impl Columns {
    fn new(rows: &[Vec<f64>], dim: usize) -> Self {
        let data = (0..dim).map(|v| ((v, Vec::new()), Arc::new(column(rows, v)))).collect();
        Columns { data, fitted: HashMap::new() }
    }

    fn get(&mut self, a: usize, set: &[usize]) -> Result<Arc<Vec<f64>>> {
        if let Some(c) = self.data.get(&(a, set.to_vec())) {
            return Ok(c.clone());
        }
        for (i, &b) in set.iter().enumerate() {
            let mut rest = set.to_vec();
            rest.remove(i);
            let Some((edge, pair)) = self.fitted.get(&(a.min(b), a.max(b), rest.clone())).cloned() else {
                continue;
            };
            let [p, q] = edge.conditioned;
            let x = self.get(p, &rest)?;
            let y = self.get(q, &rest)?;
            let out: Vec<f64> = if a == p {
                x.iter().zip(y.iter()).map(|(&s, &t)| pair.cond_first(s, t)).collect()
            } else {
                x.iter().zip(y.iter()).map(|(&s, &t)| pair.cond_second(s, t)).collect()
            };
            let out = Arc::new(out);
            self.data.insert((a, set.to_vec()), out.clone());
            return Ok(out);
        }
        Err(Error::InvalidParameters(format!("invalid vine: F({a} | {set:?}) is not reachable")))
    }

    fn args(&mut self, e: &VineEdge) -> Result<(Arc<Vec<f64>>, Arc<Vec<f64>>)> {
        let [p, q] = e.conditioned;
        Ok((self.get(p, &e.conditioning)?, self.get(q, &e.conditioning)?))
    }
}

fn check_rows(rows: &[Vec<f64>], dim: usize) -> Result<()> {
    if rows.len() < MIN_COPULA_OBS {
        return Err(Error::InsufficientData { needed: MIN_COPULA_OBS, got: rows.len() });
    }
    crate::copulas::check_unit_rows(rows, dim)
}

/// Fits every edge of a fixed structure, tree by tree, with `choose`.
fn fit_sequential<F>(rows: &[Vec<f64>], s: &VineStructure, choose: F) -> Result<VineModel>
where
    F: Fn(usize, &[f64], &[f64]) -> Option<PairFit> + Sync,
{
    s.validate()?;
    check_rows(rows, s.dim)?;
    let mut cols = Columns::new(rows, s.dim);
    let mut trees = Vec::with_capacity(s.trees.len());
    let mut flat = 0;
    for tree in &s.trees {
        let args = tree.iter().map(|e| cols.args(e)).collect::<Result<Vec<_>>>()?;
        let fits: Vec<Option<PairFit>> =
            args.par_iter().enumerate().map(|(i, (u, v))| choose(flat + i, u, v)).collect();
        let mut out = Vec::with_capacity(tree.len());
        for (e, fit) in tree.iter().zip(fits) {
            let fit = fit.ok_or_else(|| Error::FitDiverged {
                reason: format!("edge {:?} could not be refitted", e),
                best_loglik: f64::NAN,
                best_params: Vec::new(),
            })?;
            cols.fitted.insert(e.key(), (e.clone(), fit.copula.clone()));
            out.push(FittedEdge::from_fit(e.clone(), fit));
        }
        flat += tree.len();
        trees.push(out);
    }
    VineModel::from_edges(s.kind, s.dim, trees, rows.len())
}

/// Sequential estimation on a given structure: each edge takes the AIC-best
/// candidate (or independence when the τ test does not reject it).
pub fn fit_vine(rows: &[Vec<f64>], structure: &VineStructure, families: &[PairFamily]) -> Result<VineModel> {
    fit_sequential(rows, structure, |_, u, v| Some(select_pair(u, v, families)))
}

/// Re-estimates the parameters of `model` on `rows`, keeping its structure
/// and every edge's family and rotation.
pub fn refit_vine(model: &VineModel, rows: &[Vec<f64>]) -> Result<VineModel> {
    let pairs: Vec<PairCopula> = model.pair_copulas().cloned().collect();
    fit_sequential(rows, &model.structure(), |i, u, v| {
        let p = &pairs[i];
        fit_pair_family(u, v, p.family, p.rotation).map(|(copula, loglik)| PairFit { copula, loglik, fallback: false })
    })
}

/// Node of the tree being built: its variables and, above tree 1, the two
/// nodes of the previous tree it joins.
#[derive(Clone)]
struct Node {
    full: Vec<usize>,
    ends: Option<(usize, usize)>,
}

struct Candidate {
    i: usize,
    j: usize,
    edge: VineEdge,
    weight: f64,
}

fn candidate(cols: &mut Columns, nodes: &[Node], i: usize, j: usize) -> Result<Option<Candidate>> {
    let (a, b) = (&nodes[i], &nodes[j]);
    let admissible = match (a.ends, b.ends) {
        (None, None) => true,
        (Some((p, q)), Some((r, s))) => p == r || p == s || q == r || q == s,
        _ => false,
    };
    if !admissible {
        return Ok(None);
    }
    let only = |x: &Vec<usize>, y: &Vec<usize>| x.iter().copied().filter(|v| !y.contains(v)).collect::<Vec<_>>();
    let (xa, xb) = (only(&a.full, &b.full), only(&b.full, &a.full));
    let common: Vec<usize> = a.full.iter().copied().filter(|v| b.full.contains(v)).collect();
    let ([x], [y]) = (&xa[..], &xb[..]) else {
        return Ok(None);
    };
    let edge = VineEdge::new(*x, *y, common);
    let (u, v) = cols.args(&edge)?;
    Ok(Some(Candidate { i, j, edge, weight: kendall_tau(&u, &v).abs() }))
}

/// Maximum spanning tree (Prim) over the candidate edges.
fn max_spanning_tree(n: usize, cands: &[Candidate]) -> Result<Vec<usize>> {
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut chosen = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let best = cands
            .iter()
            .enumerate()
            .filter(|(_, c)| in_tree[c.i] != in_tree[c.j])
            .max_by(|(_, a), (_, b)| a.weight.total_cmp(&b.weight));
        let Some((k, c)) = best else {
            return Err(Error::InvalidParameters("vine tree candidates are disconnected".into()));
        };
        in_tree[c.i] = true;
        in_tree[c.j] = true;
        chosen.push(k);
    }
    Ok(chosen)
}

/// Star centred on the node with the largest total |τ|.
fn star(n: usize, cands: &[Candidate]) -> Vec<usize> {
    let mut total = vec![0.0; n];
    for c in cands {
        total[c.i] += c.weight;
        total[c.j] += c.weight;
    }
    let root = (0..n).max_by(|&a, &b| total[a].total_cmp(&total[b]).then(b.cmp(&a))).unwrap_or(0);
    (0..cands.len()).filter(|&k| cands[k].i == root || cands[k].j == root).collect()
}

/// Greedy heaviest path: start from the heaviest edge and keep attaching the
/// heaviest unused node to either end.
fn greedy_path(n: usize, cands: &[Candidate]) -> Vec<usize> {
    let w: HashMap<(usize, usize), usize> = cands.iter().enumerate().map(|(k, c)| ((c.i, c.j), k)).collect();
    let find = |a: usize, b: usize| w.get(&(a.min(b), a.max(b))).copied();
    let first = (0..cands.len()).max_by(|&a, &b| cands[a].weight.total_cmp(&cands[b].weight).then(b.cmp(&a))).unwrap_or(0);
    let (mut head, mut tail) = (cands[first].i, cands[first].j);
    let mut used = vec![false; n];
    used[head] = true;
    used[tail] = true;
    let mut chosen = vec![first];
    for _ in 2..n {
        let mut best: Option<(f64, usize, bool, usize)> = None;
        for x in (0..n).filter(|&x| !used[x]) {
            for (end, at_head) in [(head, true), (tail, false)] {
                if let Some(k) = find(end, x) {
                    if best.is_none_or(|b| cands[k].weight > b.0) {
                        best = Some((cands[k].weight, x, at_head, k));
                    }
                }
            }
        }
        let (_, x, at_head, k) = best.expect("tree 1 candidates are complete");
        used[x] = true;
        if at_head {
            head = x;
        } else {
            tail = x;
        }
        chosen.push(k);
    }
    chosen
}

/// Builds the structure tree by tree (maximum spanning trees on |τ| for the
/// R-vine, stars for the C-vine, a greedy path for the D-vine), fitting each
/// tree's edges before moving up.
pub fn select_vine(rows: &[Vec<f64>], kind: VineKind, families: &[PairFamily]) -> Result<VineModel> {
    let dim = rows.first().map_or(0, Vec::len);
    if dim < 3 {
        return Err(Error::InsufficientAssets { needed: 3, found: dim });
    }
    check_rows(rows, dim)?;
    let mut cols = Columns::new(rows, dim);
    let mut nodes: Vec<Node> = (0..dim).map(|v| Node { full: vec![v], ends: None }).collect();
    let mut trees = Vec::with_capacity(dim - 1);
    for k in 0..dim - 1 {
        let n = nodes.len();
        let mut cands = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if let Some(c) = candidate(&mut cols, &nodes, i, j)? {
                    cands.push(c);
                }
            }
        }
        let chosen = match kind {
            _ if n == 2 => vec![0],
            VineKind::RVine => max_spanning_tree(n, &cands)?,
            VineKind::CVine => star(n, &cands),
            VineKind::DVine if k == 0 => greedy_path(n, &cands),
            VineKind::DVine => max_spanning_tree(n, &cands)?,
        };
        let edges: Vec<&Candidate> = chosen.iter().map(|&c| &cands[c]).collect();
        let args = edges.iter().map(|c| cols.args(&c.edge)).collect::<Result<Vec<_>>>()?;
        let fits: Vec<PairFit> = args.par_iter().map(|(u, v)| select_pair(u, v, families)).collect();
        let mut out = Vec::with_capacity(edges.len());
        let mut next = Vec::with_capacity(edges.len());
        for (c, fit) in edges.iter().zip(fits) {
            cols.fitted.insert(c.edge.key(), (c.edge.clone(), fit.copula.clone()));
            next.push(Node { full: c.edge.full_set(), ends: Some((c.i, c.j)) });
            out.push(FittedEdge::from_fit(c.edge.clone(), fit));
        }
        trees.push(out);
        nodes = next;
    }
    VineModel::from_edges(kind, dim, trees, rows.len())
}

/// Structure chosen by [`select_vine`] with the default pair families.
pub fn select_structure(rows: &[Vec<f64>], kind: VineKind) -> Result<VineStructure> {
    Ok(select_vine(rows, kind, &super::pair::DEFAULT_PAIR_FAMILIES)?.structure())
}
