//! Straight-line evaluation plans over a vine.
//!
//! Every quantity a vine needs is a conditional value `F(a | S)`, obtained
//! from the edge `{a, b | S∖b}` by an h-function. Resolving these recursively
//! once per structure gives a fixed list of operations over numbered slots,
//! which is then replayed for every observation.

use std::collections::HashMap;

use super::pair::PairCopula;
use super::structure::{VineEdge, VineStructure};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) enum Op {
    /// `out = F(a | b, D)` (`first`) or `F(b | a, D)` from edge `{a, b | D}`.
    Cond { edge: usize, first: bool, x: usize, y: usize, out: usize },
    /// Inverts `Cond`: recovers the conditioned argument from `w` and the other argument.
    Inv { edge: usize, first: bool, w: usize, given: usize, out: usize },
    /// Adds the edge's log-density at `(x, y)`.
    Dens { edge: usize, x: usize, y: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub n_slots: usize,
    pub ops: Vec<Op>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl Program {
    /// Runs the plan on `slots` (inputs already written); returns the summed
    /// log-density of any `Dens` operations.
    pub fn run(&self, pairs: &[PairCopula], slots: &mut [f64]) -> f64 {
        let mut ln = 0.0;
        for op in &self.ops {
            match *op {
                Op::Cond { edge, first, x, y, out } => {
                    let p = &pairs[edge];
                    slots[out] = if first { p.cond_first(slots[x], slots[y]) } else { p.cond_second(slots[x], slots[y]) };
                }
                Op::Inv { edge, first, w, given, out } => {
                    let p = &pairs[edge];
                    slots[out] =
                        if first { p.cond_first_inv(slots[w], slots[given]) } else { p.cond_second_inv(slots[given], slots[w]) };
                }
                Op::Dens { edge, x, y } => ln += pairs[edge].ln_density_unchecked(slots[x], slots[y]),
            }
        }
        ln
    }
}

type Key = (usize, Vec<usize>);

struct Compiler<'a> {
    edges: Vec<&'a VineEdge>,
    lookup: HashMap<(usize, usize, Vec<usize>), usize>,
    memo: HashMap<Key, usize>,
    ops: Vec<Op>,
    n_slots: usize,
}

impl<'a> Compiler<'a> {
    fn new(s: &'a VineStructure) -> Self {
        let edges: Vec<&VineEdge> = s.trees.iter().flatten().collect();
        let lookup = edges.iter().enumerate().map(|(i, e)| (e.key(), i)).collect();
        let memo = (0..s.dim).map(|v| ((v, Vec::new()), v)).collect();
        Compiler { edges, lookup, memo, ops: Vec::new(), n_slots: s.dim }
    }

    fn fresh(&mut self) -> usize {
        self.n_slots += 1;
        self.n_slots - 1
    }

    fn edge_for(&self, a: usize, b: usize, rest: &[usize]) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b), rest.to_vec())).copied()
    }

    /// Slot holding `F(a | set)`; `set` must be sorted.
    fn cond(&mut self, a: usize, set: &[usize]) -> Result<usize> {
        if let Some(&s) = self.memo.get(&(a, set.to_vec())) {
            return Ok(s);
        }
        for (i, &b) in set.iter().enumerate() {
            let mut rest = set.to_vec();
            rest.remove(i);
            if let Some(e) = self.edge_for(a, b, &rest) {
                let [p, q] = self.edges[e].conditioned;
                let x = self.cond(p, &rest)?;
                let y = self.cond(q, &rest)?;
                let out = self.fresh();
                self.ops.push(Op::Cond { edge: e, first: a == p, x, y, out });
                self.memo.insert((a, set.to_vec()), out);
                return Ok(out);
            }
        }
        Err(Error::InvalidParameters(format!("invalid vine: F({a} | {set:?}) is not reachable")))
    }

    fn args(&mut self, e: usize) -> Result<(usize, usize)> {
        let [p, q] = self.edges[e].conditioned;
        let d = self.edges[e].conditioning.clone();
        Ok((self.cond(p, &d)?, self.cond(q, &d)?))
    }

    fn finish(self, inputs: Vec<usize>, outputs: Vec<usize>) -> Program {
        Program { n_slots: self.n_slots, ops: self.ops, inputs, outputs }
    }
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Log-density: inputs are the `dim` uniforms in variable order.
pub(crate) fn density_program(s: &VineStructure) -> Result<Program> {
    let mut c = Compiler::new(s);
    for e in 0..c.edges.len() {
        let (x, y) = c.args(e)?;
        c.ops.push(Op::Dens { edge: e, x, y });
    }
    Ok(c.finish((0..s.dim).collect(), Vec::new()))
}

/// Rosenblatt transform: output for variable `v` is `F(v | variables sampled before v)`.
pub(crate) fn rosenblatt_program(s: &VineStructure) -> Result<Program> {
    let o = s.ordering()?;
    let mut c = Compiler::new(s);
    let mut outputs = vec![0; s.dim];
    for (k, &v) in o.order.iter().enumerate() {
        outputs[v] = c.cond(v, &sorted(&o.order[..k]))?;
    }
    Ok(c.finish((0..s.dim).collect(), outputs))
}

/// Inverse Rosenblatt transform: inputs are independent uniforms in sampling
/// order, outputs the `dim` dependent uniforms in variable order.
pub(crate) fn sampling_program(s: &VineStructure) -> Result<Program> {
    let o = s.ordering()?;
    let mut c = Compiler::new(s);
    let mut inputs = Vec::with_capacity(s.dim);
    for (k, &v) in o.order.iter().enumerate() {
        let partners = &o.partners[k];
        let top = if k == 0 { v } else { c.fresh() };
        c.memo.insert((v, sorted(partners)), top);
        inputs.push(top);
        for j in (1..=partners.len()).rev() {
            let m = partners[j - 1];
            let rest = sorted(&partners[..j - 1]);
            let e = c
                .edge_for(v, m, &rest)
                .ok_or_else(|| Error::InvalidParameters(format!("invalid vine: no edge {{{v}, {m} | {rest:?}}}")))?;
            let given = c.cond(m, &rest)?;
            let w = c.memo[&(v, sorted(&partners[..j]))];
            let out = if j == 1 { v } else { c.fresh() };
            c.ops.push(Op::Inv { edge: e, first: c.edges[e].conditioned[0] == v, w, given, out });
            c.memo.insert((v, rest), out);
        }
    }
    Ok(c.finish(inputs, (0..s.dim).collect()))
}
