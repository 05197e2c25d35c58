//! Pair-copula constructions (R-, C- and D-vines): structure selection,
//! sequential estimation, density, simulation and goodness of fit.

mod gof;
mod pair;
mod program;
mod select;
mod structure;

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::check_unit_rows;
use crate::error::{Error, Result};
use crate::rng;

pub use gof::vine_gof;
pub use pair::{
    fit_pair_family, h_function, h_inverse, independence_p_value, select_pair, PairCopula, PairFamily, PairFit,
    DEFAULT_PAIR_FAMILIES, INDEPENDENCE_LEVEL,
};
pub use select::{fit_vine, refit_vine, select_structure, select_vine};
pub use structure::{VineEdge, VineKind, VineStructure};

use pair::EDGE;
use program::{density_program, rosenblatt_program, sampling_program, Program};

/// One edge with its pair copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEdge {
    #[serde(flatten)]
    pub edge: VineEdge,
    #[serde(flatten)]
    pub copula: PairCopula,
    #[serde(default, deserialize_with = "crate::serde_nan::deserialize")]
    pub loglik: f64,
    /// Every candidate failed to fit and independence was used instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

impl FittedEdge {
    pub(crate) fn from_fit(edge: VineEdge, fit: PairFit) -> Self {
        FittedEdge { edge, copula: fit.copula, loglik: fit.loglik, fallback: fit.fallback }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineModel {
    pub kind: VineKind,
    pub dim: usize,
    /// Vine array (lower triangular; `None` above the diagonal).
    pub matrix: Vec<Vec<Option<usize>>>,
    pub trees: Vec<Vec<FittedEdge>>,
    #[serde(deserialize_with = "crate::serde_nan::deserialize")]
    pub loglik: f64,
    #[serde(deserialize_with = "crate::serde_nan::deserialize")]
    pub aic: f64,
    #[serde(deserialize_with = "crate::serde_nan::deserialize")]
    pub bic: f64,
    pub n_obs: usize,
    pub gof_p: Option<f64>,
}

impl VineModel {
    /// A vine with given pair copulas; `pairs[k][i]` decorates `structure.trees[k][i]`.
    pub fn new(structure: &VineStructure, pairs: Vec<Vec<PairCopula>>) -> Result<Self> {
        if pairs.len() != structure.trees.len() || pairs.iter().zip(&structure.trees).any(|(p, t)| p.len() != t.len()) {
            return Err(Error::InvalidParameters("one pair copula is needed per vine edge".into()));
        }
        let trees = structure
            .trees
            .iter()
            .zip(pairs)
            .map(|(t, p)| {
                t.iter()
                    .zip(p)
                    .map(|(e, c)| FittedEdge { edge: e.clone(), copula: c, loglik: f64::NAN, fallback: false })
                    .collect()
            })
            .collect();
        let mut m = Self::from_edges(structure.kind, structure.dim, trees, 0)?;
        m.loglik = f64::NAN;
        m.aic = f64::NAN;
        m.bic = f64::NAN;
        Ok(m)
    }

    pub(crate) fn from_edges(kind: VineKind, dim: usize, trees: Vec<Vec<FittedEdge>>, n_obs: usize) -> Result<Self> {
        let mut m = VineModel { kind, dim, matrix: Vec::new(), trees, loglik: 0.0, aic: 0.0, bic: 0.0, n_obs, gof_p: None };
        m.validate()?;
        m.matrix = m.structure().matrix()?;
        m.loglik = m.trees.iter().flatten().map(|e| e.loglik).sum();
        let k = m.n_params() as f64;
        m.aic = 2.0 * k - 2.0 * m.loglik;
        m.bic = k * (n_obs as f64).ln() - 2.0 * m.loglik;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.structure().validate()?;
        self.pair_copulas().try_for_each(PairCopula::validate)
    }

    pub fn structure(&self) -> VineStructure {
        VineStructure {
            kind: self.kind,
            dim: self.dim,
            trees: self.trees.iter().map(|t| t.iter().map(|e| e.edge.clone()).collect()).collect(),
        }
    }

    /// Pair copulas tree by tree.
    pub fn pair_copulas(&self) -> impl Iterator<Item = &PairCopula> {
        self.trees.iter().flatten().map(|e| &e.copula)
    }

    pub fn n_params(&self) -> usize {
        self.pair_copulas().map(PairCopula::n_params).sum()
    }

    /// Edges that fell back to independence after every candidate failed.
    pub fn fallback_edges(&self) -> Vec<VineEdge> {
        self.trees.iter().flatten().filter(|e| e.fallback).map(|e| e.edge.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: VineModel = serde_json::from_str(s)?;
        m.validate()?;
        m.matrix = m.structure().matrix()?;
        Ok(m)
    }
}

fn flat_pairs(model: &VineModel) -> Vec<PairCopula> {
    model.pair_copulas().cloned().collect()
}

fn check_point(u: &[f64], dim: usize) -> Result<()> {
    if u.len() != dim {
        return Err(Error::DomainError(format!("expected {dim} coordinates, got {}", u.len())));
    }
    if u.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::DomainError(format!("vine arguments {u:?} must lie strictly inside (0, 1)")));
    }
    Ok(())
}

/// Reusable evaluator for many points under one model.
struct Evaluator {
    program: Program,
    pairs: Vec<PairCopula>,
}

impl Evaluator {
    fn apply(&self, u: &[f64], slots: &mut [f64]) -> f64 {
        for (&s, &x) in self.program.inputs.iter().zip(u) {
            slots[s] = x;
        }
        self.program.run(&self.pairs, slots)
    }
}

pub fn vine_ln_density(model: &VineModel, u: &[f64]) -> Result<f64> {
    check_point(u, model.dim)?;
    let ev = Evaluator { program: density_program(&model.structure())?, pairs: flat_pairs(model) };
    let mut slots = vec![0.0; ev.program.n_slots];
    Ok(ev.apply(u, &mut slots))
}

pub fn vine_density(model: &VineModel, u: &[f64]) -> Result<f64> {
    Ok(vine_ln_density(model, u)?.exp())
}

/// Per-edge log-densities at `u`, tree by tree.
pub fn edge_ln_densities(model: &VineModel, u: &[f64]) -> Result<Vec<f64>> {
    check_point(u, model.dim)?;
    let p = density_program(&model.structure())?;
    let pairs = flat_pairs(model);
    let mut slots = vec![0.0; p.n_slots];
    for (&s, &x) in p.inputs.iter().zip(u) {
        slots[s] = x;
    }
    let mut out = vec![0.0; pairs.len()];
    for op in &p.ops {
        let single = Program { n_slots: p.n_slots, ops: vec![*op], inputs: Vec::new(), outputs: Vec::new() };
        let ln = single.run(&pairs, &mut slots);
        if let program::Op::Dens { edge, .. } = op {
            out[*edge] = ln;
        }
    }
    Ok(out)
}

pub fn vine_loglik(model: &VineModel, rows: &[Vec<f64>]) -> Result<f64> {
    check_unit_rows(rows, model.dim)?;
    let ev = Evaluator { program: density_program(&model.structure())?, pairs: flat_pairs(model) };
    Ok(rows
        .par_iter()
        .map_init(|| vec![0.0; ev.program.n_slots], |slots, r| ev.apply(r, slots))
        .collect::<Vec<f64>>()
        .iter()
        .sum())
}

/// Maps each row to `(F(u_v | earlier variables))_v`, which is uniform on
/// the unit cube when the rows follow the model.
pub fn rosenblatt(model: &VineModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_unit_rows(rows, model.dim)?;
    let ev = Evaluator { program: rosenblatt_program(&model.structure())?, pairs: flat_pairs(model) };
    Ok(rows
        .par_iter()
        .map_init(
            || vec![0.0; ev.program.n_slots],
            |slots, r| {
                ev.apply(r, slots);
                ev.program.outputs.iter().map(|&s| slots[s]).collect()
            },
        )
        .collect())
}

/// Draws from a vine by inverting the Rosenblatt transform.
#[derive(Debug, Clone)]
pub struct VineSampler {
    program: Program,
    pairs: Vec<PairCopula>,
    dim: usize,
}

impl VineSampler {
    pub fn new(model: &VineModel) -> Result<Self> {
        model.validate()?;
        Ok(VineSampler { program: sampling_program(&model.structure())?, pairs: flat_pairs(model), dim: model.dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut slots = vec![0.0; self.program.n_slots];
        for &s in &self.program.inputs {
            slots[s] = rng.random::<f64>().clamp(EDGE, 1.0 - EDGE);
        }
        self.program.run(&self.pairs, &mut slots);
        for (o, &s) in out.iter_mut().zip(&self.program.outputs) {
            *o = slots[s];
        }
    }
}

const CHUNK: usize = 1024;

/// `n` draws; chunk `c` of 1024 rows uses substream `c` of `seed`.
pub fn simulate_vine(model: &VineModel, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidParameters("n must be at least 1".into()));
    }
    let s = VineSampler::new(model)?;
    let chunks: Vec<Vec<Vec<f64>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng::substream(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let mut row = vec![0.0; s.dim];
                    s.draw(&mut r, &mut row);
                    row
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Writes `kind,gof_p,aic,bic`, one line per model.
pub fn write_vine_comparison_csv<W: Write>(w: W, models: &[VineModel]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "gof_p", "aic", "bic"])?;
    for m in models {
        let p = m.gof_p.map_or_else(String::new, |p| p.to_string());
        out.write_record([m.kind.name().to_string(), p, m.aic.to_string(), m.bic.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dvine3(p: [PairCopula; 3]) -> VineModel {
        let s = VineStructure {
            kind: VineKind::DVine,
            dim: 3,
            trees: vec![vec![VineEdge::new(0, 1, vec![]), VineEdge::new(1, 2, vec![])], vec![VineEdge::new(0, 2, vec![1])]],
        };
        let [a, b, c] = p;
        VineModel::new(&s, vec![vec![a, b], vec![c]]).unwrap()
    }

    #[test]
    fn independence_vine_has_unit_density() {
        let m = dvine3([PairCopula::independence(), PairCopula::independence(), PairCopula::independence()]);
        assert_eq!(vine_density(&m, &[0.2, 0.5, 0.9]).unwrap(), 1.0);
        assert!(vine_density(&m, &[0.0, 0.5, 0.9]).is_err());
    }

    #[test]
    fn bivariate_vine_is_its_pair() {
        let s = VineStructure { kind: VineKind::RVine, dim: 2, trees: vec![vec![VineEdge::new(0, 1, vec![])]] };
        let p = PairCopula::gumbel(1.7, 0).unwrap();
        let m = VineModel::new(&s, vec![vec![p.clone()]]).unwrap();
        for u in [[0.3, 0.4], [0.9, 0.05]] {
            assert_eq!(vine_density(&m, &u).unwrap(), p.density(u[0], u[1]).unwrap());
        }
    }

    #[test]
    fn rosenblatt_inverts_sampler() {
        let m = dvine3([
            PairCopula::clayton(2.0, 0).unwrap(),
            PairCopula::gumbel(1.5, 90).unwrap(),
            PairCopula::t(0.3, 6.0).unwrap(),
        ]);
        let s = VineSampler::new(&m).unwrap();
        let mut r = rng::seeded(1);
        let mut row = vec![0.0; 3];
        for _ in 0..20 {
            let mut probe = r.clone();
            s.draw(&mut r, &mut row);
            let w: Vec<f64> = (0..3).map(|_| probe.random::<f64>()).collect();
            let back = rosenblatt(&m, &[row.clone()]).unwrap().remove(0);
            let o = m.structure().ordering().unwrap().order;
            for (k, &v) in o.iter().enumerate() {
                assert!((back[v] - w[k]).abs() < 1e-7, "{back:?} vs {w:?}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let m = dvine3([
            PairCopula::gaussian(0.4).unwrap(),
            PairCopula::clayton(1.2, 180).unwrap(),
            PairCopula::independence(),
        ]);
        let back = VineModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.structure(), m.structure());
        assert_eq!(back.pair_copulas().collect::<Vec<_>>(), m.pair_copulas().collect::<Vec<_>>());
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["trees"][0][1]["rotation"], 180);
        assert_eq!(v["matrix"][0][2], serde_json::Value::Null);
    }
}
