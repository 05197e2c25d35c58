//! Copula density and distribution function.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use super::corr::{cholesky_rows, ln_det_from_cholesky, mahalanobis};
use super::mvn::{bvt_cdf, orthant_qmc, t_mixing_table, MAX_QMC_DIM};
use super::{check_unit_rows, CopulaFamily, CopulaModel};
use crate::error::{Error, Result};
use crate::numeric::special::{bvn_cdf, norm_quantile, student_t_quantile};

/// A model with its per-family constants precomputed.
#[derive(Debug, Clone)]
pub(crate) enum Prepared {
    Gaussian { l: Vec<Vec<f64>>, ln_det: f64 },
    T { l: Vec<Vec<f64>>, ln_det: f64, nu: f64, norm: f64, mix: OnceLock<Vec<f64>> },
    Clayton { delta: f64, dim: usize },
    Gumbel { delta: f64, coef: Vec<f64> },
}

/// Normalizing constant of the t copula density.
pub(crate) fn t_log_norm(nu: f64, d: usize) -> f64 {
    let df = d as f64;
    ln_gamma(0.5 * (nu + df)) + (df - 1.0) * ln_gamma(0.5 * nu) - df * ln_gamma(0.5 * (nu + 1.0))
}

/// Coefficients `b_j` with `(-1)^d ψ^{(d)}(t) = ψ(t) t^{-d} Σ_j b_j t^{jα}` for
/// the Gumbel generator `ψ(t) = exp(-t^α)`. All coefficients are non-negative.
pub(crate) fn gumbel_derivative_coefs(alpha: f64, d: usize) -> Vec<f64> {
    let mut b = vec![0.0; d + 1];
    b[0] = 1.0;
    for n in 0..d {
        let mut next = vec![0.0; d + 1];
        for j in 0..=n + 1 {
            let keep = if j <= n { (n as f64 - j as f64 * alpha) * b[j] } else { 0.0 };
            let raise = if j >= 1 { alpha * b[j - 1] } else { 0.0 };
            next[j] = keep + raise;
        }
        b = next;
    }
    b
}

impl Prepared {
    pub fn new(m: &CopulaModel) -> Result<Self> {
        m.validate()?;
        Ok(match m.family {
            CopulaFamily::Gaussian | CopulaFamily::T => {
                let l = cholesky_rows(&m.correlation())
                    .ok_or_else(|| Error::InvalidParameters("correlation matrix is not positive definite".into()))?;
                let ln_det = ln_det_from_cholesky(&l);
                match m.nu {
                    Some(nu) => Prepared::T { norm: t_log_norm(nu, m.dim), l, ln_det, nu, mix: OnceLock::new() },
                    None => Prepared::Gaussian { l, ln_det },
                }
            }
            CopulaFamily::Clayton => Prepared::Clayton { delta: m.params[0], dim: m.dim },
            CopulaFamily::Gumbel => Prepared::Gumbel {
                delta: m.params[0],
                coef: gumbel_derivative_coefs(1.0 / m.params[0], m.dim),
            },
        })
    }

    /// Log density at `u`; `x` and `y` are scratch buffers of length `dim`.
    pub fn ln_density(&self, u: &[f64], x: &mut [f64], y: &mut [f64]) -> f64 {
        match self {
            Prepared::Gaussian { l, ln_det } => {
                let mut sq = 0.0;
                for (xi, &ui) in x.iter_mut().zip(u) {
                    *xi = norm_quantile(ui);
                    sq += *xi * *xi;
                }
                let q = mahalanobis(l, x, y);
                -0.5 * ln_det - 0.5 * (q - sq)
            }
            Prepared::T { l, ln_det, nu, norm, .. } => {
                for (xi, &ui) in x.iter_mut().zip(u) {
                    *xi = student_t_quantile(ui, *nu);
                }
                t_ln_density_at(l, *ln_det, *nu, *norm, x, y)
            }
            Prepared::Clayton { delta, dim } => clayton_ln_density(*delta, *dim, u),
            Prepared::Gumbel { delta, coef, .. } => gumbel_ln_density(*delta, coef, u),
        }
    }

    pub fn cdf(&self, u: &[f64]) -> f64 {
        match self {
            Prepared::Gaussian { l, .. } => {
                let b: Vec<f64> = u.iter().map(|&v| norm_quantile(v)).collect();
                if l.len() == 2 {
                    bvn_cdf(b[0], b[1], l[1][0])
                } else {
                    orthant_qmc(l, &b, None)
                }
            }
            Prepared::T { l, nu, mix, .. } => {
                let b: Vec<f64> = u.iter().map(|&v| student_t_quantile(v, *nu)).collect();
                if l.len() == 2 {
                    bvt_cdf(b[0], b[1], l[1][0], *nu)
                } else {
                    let table = mix.get_or_init(|| t_mixing_table(*nu, l.len() - 1));
                    orthant_qmc(l, &b, Some(table))
                }
            }
            Prepared::Clayton { delta, dim } => {
                let s: f64 = u.iter().map(|&v| v.powf(-delta)).sum::<f64>() - *dim as f64 + 1.0;
                s.powf(-1.0 / delta)
            }
            Prepared::Gumbel { delta, .. } => {
                let t: f64 = u.iter().map(|&v| (-v.ln()).powf(*delta)).sum();
                (-t.powf(1.0 / delta)).exp()
            }
        }
    }
}

/// t copula log density given the t quantiles `x`.
#[inline]
pub(crate) fn t_ln_density_at(l: &[Vec<f64>], ln_det: f64, nu: f64, norm: f64, x: &[f64], y: &mut [f64]) -> f64 {
    let d = x.len() as f64;
    let q = mahalanobis(l, x, y);
    let marg: f64 = x.iter().map(|&v| (v * v / nu).ln_1p()).sum();
    norm - 0.5 * ln_det - 0.5 * (nu + d) * (q / nu).ln_1p() + 0.5 * (nu + 1.0) * marg
}

pub(crate) fn clayton_ln_density(delta: f64, dim: usize, u: &[f64]) -> f64 {
    let mut s = 1.0 - dim as f64;
    let mut lsum = 0.0;
    for &v in u {
        let lv = v.ln();
        s += (-delta * lv).exp();
        lsum += lv;
    }
    let lead: f64 = (0..dim).map(|k| (k as f64 * delta).ln_1p()).sum();
    lead - (delta + 1.0) * lsum - (dim as f64 + 1.0 / delta) * s.ln()
}

pub(crate) fn gumbel_ln_density(delta: f64, coef: &[f64], u: &[f64]) -> f64 {
    let d = u.len();
    let alpha = 1.0 / delta;
    let mut t = 0.0;
    let mut tail = 0.0;
    for &v in u {
        let w = -v.ln();
        let lw = w.ln();
        t += (delta * lw).exp();
        tail += delta.ln() + (delta - 1.0) * lw + w;
    }
    let lt = t.ln();
    // log Σ_j b_j t^{jα}
    let terms: Vec<f64> = (1..=d).filter(|&j| coef[j] > 0.0).map(|j| coef[j].ln() + j as f64 * alpha * lt).collect();
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + terms.iter().map(|&v| (v - mx).exp()).sum::<f64>().ln();
    -(alpha * lt).exp() - d as f64 * lt + lse + tail
}

fn check_point(m: &CopulaModel, u: &[f64]) -> Result<()> {
    if m.dim > MAX_QMC_DIM {
        return Err(Error::InvalidParameters(format!("copula dimension {} exceeds {MAX_QMC_DIM}", m.dim)));
    }
    check_unit_rows(std::slice::from_ref(&u.to_vec()), m.dim)
}

pub fn copula_ln_density(model: &CopulaModel, u: &[f64]) -> Result<f64> {
    check_point(model, u)?;
    let p = Prepared::new(model)?;
    let (mut x, mut y) = (vec![0.0; model.dim], vec![0.0; model.dim]);
    Ok(p.ln_density(u, &mut x, &mut y))
}

pub fn copula_density(model: &CopulaModel, u: &[f64]) -> Result<f64> {
    copula_ln_density(model, u).map(f64::exp)
}

pub fn copula_cdf(model: &CopulaModel, u: &[f64]) -> Result<f64> {
    check_point(model, u)?;
    Ok(Prepared::new(model)?.cdf(u).clamp(0.0, 1.0))
}

/// Sum of log densities over the rows of `u`.
pub fn copula_loglik(model: &CopulaModel, rows: &[Vec<f64>]) -> Result<f64> {
    check_unit_rows(rows, model.dim)?;
    let p = Prepared::new(model)?;
    let (mut x, mut y) = (vec![0.0; model.dim], vec![0.0; model.dim]);
    Ok(rows.iter().map(|r| p.ln_density(r, &mut x, &mut y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn corr2(r: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0])
    }

    #[test]
    fn clayton_cdf_example() {
        let m = CopulaModel::clayton(2, 2.0).unwrap();
        let c = copula_cdf(&m, &[0.5, 0.5]).unwrap();
        assert!((c - 7f64.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn independence_cases() {
        let u = [0.3, 0.8, 0.55];
        let prod: f64 = u.iter().product();
        let g = CopulaModel::gumbel(3, 1.0).unwrap();
        assert!((copula_cdf(&g, &u).unwrap() - prod).abs() < 1e-14);
        assert!(copula_ln_density(&g, &u).unwrap().abs() < 1e-12);
        let n = CopulaModel::independence(3).unwrap();
        assert!((copula_cdf(&n, &u).unwrap() - prod).abs() < 1e-4);
        assert!(copula_ln_density(&n, &u).unwrap().abs() < 1e-14);
    }

    #[test]
    fn boundary_input_is_rejected() {
        let m = CopulaModel::clayton(2, 1.0).unwrap();
        assert!(matches!(copula_cdf(&m, &[0.0, 0.5]), Err(Error::DomainError(_))));
        assert!(matches!(copula_density(&m, &[0.5, 1.0]), Err(Error::DomainError(_))));
    }

    #[test]
    fn grounded_and_uniform_margins() {
        let models = [
            CopulaModel::gaussian(&corr2(0.6)).unwrap(),
            CopulaModel::t(&corr2(-0.3), 4.0).unwrap(),
            CopulaModel::clayton(2, 3.0).unwrap(),
            CopulaModel::gumbel(2, 2.5).unwrap(),
        ];
        for m in &models {
            assert!(copula_cdf(m, &[1e-12, 0.7]).unwrap() < 1e-9, "{:?}", m.family);
            let c = copula_cdf(m, &[1.0 - 1e-12, 0.7]).unwrap();
            assert!((c - 0.7).abs() < 1e-7, "{:?} {c}", m.family);
        }
    }

    /// `∂²C/∂u∂v` by central differences must equal the density.
    #[test]
    fn density_is_mixed_derivative_of_cdf() {
        let models = [
            CopulaModel::gaussian(&corr2(0.6)).unwrap(),
            CopulaModel::t(&corr2(0.4), 5.0).unwrap(),
            CopulaModel::clayton(2, 1.5).unwrap(),
            CopulaModel::gumbel(2, 1.8).unwrap(),
        ];
        let h = 1e-4;
        for m in &models {
            for (u, v) in [(0.3, 0.6), (0.8, 0.75), (0.1, 0.2)] {
                let c = |a: f64, b: f64| copula_cdf(m, &[a, b]).unwrap();
                let fd = (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4.0 * h * h);
                let dens = copula_density(m, &[u, v]).unwrap();
                assert!((fd - dens).abs() < 1e-4 * (1.0 + dens), "{:?} {u} {v}: {fd} vs {dens}", m.family);
            }
        }
    }

    /// Third mixed derivative of the trivariate archimedean cdf.
    #[test]
    fn trivariate_archimedean_density() {
        let h = 1e-3;
        for m in [CopulaModel::clayton(3, 1.2).unwrap(), CopulaModel::gumbel(3, 1.7).unwrap()] {
            let u = [0.35, 0.6, 0.5];
            let mut fd = 0.0;
            for s in 0..8 {
                let sg = |k: usize| if (s >> k) & 1 == 1 { 1.0 } else { -1.0 };
                let p = [u[0] + sg(0) * h, u[1] + sg(1) * h, u[2] + sg(2) * h];
                fd += sg(0) * sg(1) * sg(2) * copula_cdf(&m, &p).unwrap();
            }
            fd /= 8.0 * h * h * h;
            let dens = copula_density(&m, &u).unwrap();
            assert!((fd - dens).abs() < 1e-4 * dens, "{:?}: {fd} vs {dens}", m.family);
        }
    }

    #[test]
    fn gumbel_coefficients_first_orders() {
        let a = 0.4;
        let b = gumbel_derivative_coefs(a, 2);
        // -ψ' = ψ α t^{α-1};  ψ'' = ψ [α² t^{2α-2} − α(α−1) t^{α−2}]
        assert!((b[1] - a * (1.0 - a)).abs() < 1e-15);
        assert!((b[2] - a * a).abs() < 1e-15);
        assert_eq!(b[0], 0.0);
    }
}
