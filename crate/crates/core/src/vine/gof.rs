//! Rosenblatt-based goodness-of-fit test for vines with a parametric bootstrap.

use rayon::prelude::*;

use super::select::refit_vine;
use super::{rosenblatt, simulate_vine, VineModel};
use crate::copulas::{empirical_copula, GofResult};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::pseudo_observations_matrix;

/// `Σ_i (D_n(E_i) − Π_j E_ij)²` for the Rosenblatt transforms `E` of `ranks`,
/// where `D_n` is their empirical distribution.
fn statistic(model: &VineModel, ranks: &[Vec<f64>]) -> Result<f64> {
    let e = rosenblatt(model, ranks)?;
    Ok(e.par_iter()
        .map(|r| {
            let d = empirical_copula(&e, r) - r.iter().product::<f64>();
            d * d
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum())
}

/// Refits the model (structure and edge families fixed) to the ranks of
/// `rows`, then compares the statistic with `n_bootstrap` replicates drawn
/// from the refitted vine and refitted the same way.
pub fn vine_gof(model: &VineModel, rows: &[Vec<f64>], n_bootstrap: usize, seed: u64) -> Result<GofResult> {
    if n_bootstrap == 0 {
        return Err(Error::InvalidParameters("n_bootstrap must be at least 1".into()));
    }
    crate::copulas::check_unit_rows(rows, model.dim)?;
    let ranks = pseudo_observations_matrix(rows);
    let fitted = refit_vine(model, &ranks)?;
    let stat = statistic(&fitted, &ranks)?;
    let n = rows.len();
    let reps: Vec<Option<f64>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let draw = simulate_vine(&fitted, n, rng::mix(seed, b as u64)).ok()?;
            let r = pseudo_observations_matrix(&draw);
            let refit = refit_vine(&fitted, &r).ok()?;
            statistic(&refit, &r).ok()
        })
        .collect();
    let done: Vec<f64> = reps.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(Error::AllModelsFailed { tried: n_bootstrap });
    }
    let exceed = done.iter().filter(|&&s| s >= stat).count();
    Ok(GofResult { statistic: stat, p_value: exceed as f64 / done.len() as f64, replicates: done.len() })
}
