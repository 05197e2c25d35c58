//! Pseudo-maximum-likelihood fitting.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::corr::{
    cholesky_from_params, correlation_from_cholesky, correlation_from_tau, ln_det_from_cholesky,
    params_from_correlation,
};
use super::eval::{clayton_ln_density, gumbel_derivative_coefs, gumbel_ln_density, t_ln_density_at, t_log_norm};
use super::mvn::MAX_QMC_DIM;
use super::{check_unit_rows, CopulaFamily, CopulaModel, PseudoObservations, MAX_ARCHIMEDEAN_DELTA};
use crate::error::{Error, Result};
use crate::numeric::optim::{bfgs, brent_minimize, numeric_gradient, BfgsOptions};
use crate::numeric::special::{norm_quantile, student_t_quantile};
use crate::stats::kendall_matrix;

pub const MIN_COPULA_OBS: usize = 100;

/// Degrees-of-freedom grid profiled before local refinement.
pub const T_NU_GRID: [f64; 29] = [
    2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0, 21.0,
    22.0, 23.0, 24.0, 25.0, 26.0, 27.0, 28.0, 29.0, 30.0,
];
const MAX_NU: f64 = 100.0;
const MIN_NU: f64 = 2.05;

pub fn fit_copula(family: CopulaFamily, u: &PseudoObservations) -> Result<CopulaModel> {
    fit_copula_rows(family, &u.rows)
}

/// Fits `family` to rows of pseudo-observations in (0,1)^N.
pub fn fit_copula_rows(family: CopulaFamily, rows: &[Vec<f64>]) -> Result<CopulaModel> {
    if rows.len() < MIN_COPULA_OBS {
        return Err(Error::InsufficientData { needed: MIN_COPULA_OBS, got: rows.len() });
    }
    let dim = rows[0].len();
    if dim < 2 {
        return Err(Error::InsufficientAssets { needed: 2, found: dim });
    }
    if dim > MAX_QMC_DIM {
        return Err(Error::InvalidParameters(format!("copula dimension {dim} exceeds {MAX_QMC_DIM}")));
    }
    check_unit_rows(rows, dim)?;
    let (mut model, ll) = match family {
        CopulaFamily::Gaussian => fit_gaussian(rows, dim)?,
        CopulaFamily::T => fit_t(rows)?,
        CopulaFamily::Clayton => fit_archimedean(rows, dim, family)?,
        CopulaFamily::Gumbel => fit_archimedean(rows, dim, family)?,
    };
    if !ll.is_finite() {
        return Err(Error::FitDiverged {
            reason: format!("{family} copula log-likelihood is not finite"),
            best_loglik: ll,
            best_params: model.params.clone(),
        });
    }
    model.set_fit_metrics(ll, rows.len());
    Ok(model)
}

fn tau_start(rows: &[Vec<f64>]) -> (DMatrix<f64>, bool) {
    correlation_from_tau(&kendall_matrix(rows))
}

/// Rows mapped elementwise through `q`.
fn transform(rows: &[Vec<f64>], q: impl Fn(f64) -> f64 + Sync) -> Vec<Vec<f64>> {
    rows.par_iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect()
}

fn gaussian_ll(x: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
    let ln_det = ln_det_from_cholesky(l);
    let mut y = vec![0.0; l.len()];
    let mut ll = 0.0;
    for r in x {
        let sq: f64 = r.iter().map(|v| v * v).sum();
        ll += -0.5 * ln_det - 0.5 * (super::corr::mahalanobis(l, r, &mut y) - sq);
    }
    ll
}

fn t_ll(x: &[Vec<f64>], l: &[Vec<f64>], nu: f64) -> f64 {
    let ln_det = ln_det_from_cholesky(l);
    let norm = t_log_norm(nu, l.len());
    let mut y = vec![0.0; l.len()];
    x.iter().map(|r| t_ln_density_at(l, ln_det, nu, norm, r, &mut y)).sum()
}

/// Maximizes `ll(L)` over correlation matrices from the start `r0`.
fn optimize_correlation<F>(r0: &DMatrix<f64>, ll: F) -> DMatrix<f64>
where
    F: Fn(&[Vec<f64>]) -> f64,
{
    let dim = r0.nrows();
    let x0 = params_from_correlation(r0).expect("start correlation is PD");
    let mut obj = |p: &[f64]| {
        let v = -ll(&cholesky_from_params(p, dim));
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let res = bfgs(
        |p, g| {
            let v = obj(p);
            numeric_gradient(&mut obj, p, g);
            v
        },
        &x0,
        &BfgsOptions { grad_tol: 1e-6, stall_grad_tol: 1e-3, ..BfgsOptions::default() },
    );
    let best = if res.value.is_finite() && res.value <= obj(&x0) { res.x } else { x0 };
    correlation_from_cholesky(&cholesky_from_params(&best, dim))
}

fn fit_gaussian(rows: &[Vec<f64>], dim: usize) -> Result<(CopulaModel, f64)> {
    let x = transform(rows, norm_quantile);
    let (r0, projected) = tau_start(rows);
    let r = if dim == 2 {
        let (rho, _) = brent_minimize(
            |rho| -gaussian_ll(&x, &[vec![1.0], vec![rho, (1.0 - rho * rho).sqrt()]]),
            -0.999,
            0.999,
            1e-10,
        );
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
    } else {
        optimize_correlation(&r0, |l| gaussian_ll(&x, l))
    };
    let mut m = CopulaModel::gaussian(&r)?;
    m.projected = projected;
    let l = super::corr::cholesky_rows(&r).expect("PD");
    Ok((m, gaussian_ll(&x, &l)))
}

fn fit_t(rows: &[Vec<f64>]) -> Result<(CopulaModel, f64)> {
    let (r0, projected) = tau_start(rows);
    let l0 = super::corr::cholesky_rows(&r0).expect("PD");
    let grid = T_NU_GRID;
    let profile: Vec<f64> = grid
        .par_iter()
        .map(|&nu| t_ll(&transform(rows, |v| student_t_quantile(v, nu)), &l0, nu))
        .collect();
    let mut k = 0;
    for i in 1..grid.len() {
        if profile[i] > profile[k] {
            k = i;
        }
    }
    let mut nu = grid[k];
    let (lo, hi) = (
        if k == 0 { MIN_NU } else { grid[k - 1] },
        if k + 1 == grid.len() { MAX_NU } else { grid[k + 1] },
    );
    let mut r = r0;
    for _ in 0..2 {
        let x = transform(rows, |v| student_t_quantile(v, nu));
        r = optimize_correlation(&r, |l| t_ll(&x, l, nu));
        let l = super::corr::cholesky_rows(&r).expect("PD");
        nu = brent_minimize(|v| -t_ll(&transform(rows, |u| student_t_quantile(u, v)), &l, v), lo, hi, 1e-4).0;
    }
    let l = super::corr::cholesky_rows(&r).expect("PD");
    let ll = t_ll(&transform(rows, |v| student_t_quantile(v, nu)), &l, nu);
    let mut m = CopulaModel::t(&r, nu)?;
    m.projected = projected;
    Ok((m, ll))
}

fn archimedean_ll(rows: &[Vec<f64>], family: CopulaFamily, delta: f64) -> f64 {
    let dim = rows[0].len();
    match family {
        CopulaFamily::Clayton => rows.iter().map(|r| clayton_ln_density(delta, dim, r)).sum(),
        CopulaFamily::Gumbel => {
            let coef = gumbel_derivative_coefs(1.0 / delta, dim);
            rows.iter().map(|r| gumbel_ln_density(delta, &coef, r)).sum()
        }
        _ => unreachable!("elliptical family"),
    }
}

fn fit_archimedean(rows: &[Vec<f64>], dim: usize, family: CopulaFamily) -> Result<(CopulaModel, f64)> {
    let neg = |delta: f64| {
        let v = -archimedean_ll(rows, family, delta);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let (delta, _) = match family {
        // log scale so weak dependence near 0 is resolved
        CopulaFamily::Clayton => {
            let (x, f) = brent_minimize(|x| neg(x.exp()), (1e-4f64).ln(), MAX_ARCHIMEDEAN_DELTA.ln(), 1e-9);
            (x.exp(), f)
        }
        _ => brent_minimize(neg, 1.0, MAX_ARCHIMEDEAN_DELTA, 1e-9),
    };
    let model = match family {
        CopulaFamily::Clayton => CopulaModel::clayton(dim, delta)?,
        _ => CopulaModel::gumbel(dim, delta)?,
    };
    Ok((model, archimedean_ll(rows, family, delta)))
}
