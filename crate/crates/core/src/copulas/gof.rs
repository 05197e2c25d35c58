//! Cramér–von Mises goodness-of-fit test with a parametric bootstrap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::Prepared;
use super::fit::fit_copula_rows;
use super::sample::sample_copula;
use super::{check_unit_rows, CopulaModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::pseudo_observations_matrix;

pub const DEFAULT_BOOTSTRAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Replicates that produced a statistic (failed refits are dropped).
    pub replicates: usize,
}

/// `C_n(at) = (1/n) #{j : sample_j ≤ at componentwise}`.
pub fn empirical_copula(sample: &[Vec<f64>], at: &[f64]) -> f64 {
    let hits = sample.iter().filter(|r| r.iter().zip(at).all(|(a, b)| a <= b)).count();
    hits as f64 / sample.len() as f64
}

/// `Σ_i (C_n(Û_i) − C_θ(Û_i))²` over the rank pseudo-observations `ranks`.
fn cvm(model: &CopulaModel, ranks: &[Vec<f64>]) -> Result<f64> {
    let p = Prepared::new(model)?;
    Ok(ranks
        .par_iter()
        .map(|r| {
            let d = empirical_copula(ranks, r) - p.cdf(r);
            d * d
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum())
}

/// Fits the model's family to the ranks of `rows`, computes the statistic and
/// compares it with `n_bootstrap` replicates drawn from the fitted copula,
/// each re-ranked and refitted. The p-value is the fraction of replicates
/// whose statistic is at least the observed one.
pub fn gof_test(model: &CopulaModel, rows: &[Vec<f64>], n_bootstrap: usize, seed: u64) -> Result<GofResult> {
    if n_bootstrap == 0 {
        return Err(Error::InvalidParameters("n_bootstrap must be at least 1".into()));
    }
    check_unit_rows(rows, model.dim)?;
    let ranks = pseudo_observations_matrix(rows);
    let fitted = fit_copula_rows(model.family, &ranks)?;
    let stat = cvm(&fitted, &ranks)?;
    let n = rows.len();
    let reps: Vec<Option<f64>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let draw = sample_copula(&fitted, n, rng::mix(seed, b as u64)).ok()?;
            let r = pseudo_observations_matrix(&draw);
            let refit = fit_copula_rows(model.family, &r).ok()?;
            cvm(&refit, &r).ok()
        })
        .collect();
    let done: Vec<f64> = reps.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(Error::AllModelsFailed { tried: n_bootstrap });
    }
    let exceed = done.iter().filter(|&&s| s >= stat).count();
    Ok(GofResult { statistic: stat, p_value: exceed as f64 / done.len() as f64, replicates: done.len() })
}
