//! Bivariate building blocks of a vine: densities, h-functions and their
//! inverses, and per-edge maximum-likelihood selection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::copulas::MAX_ARCHIMEDEAN_DELTA;
use crate::error::{Error, Result};
use crate::numeric::optim::brent_minimize;
use crate::numeric::special::{norm_cdf, norm_quantile, student_t_cdf, student_t_quantile};
use crate::stats::kendall_tau;

/// Keeps conditional values strictly inside the unit interval.
pub(crate) const EDGE: f64 = 1e-15;

const MAX_RHO: f64 = 0.999;
const MIN_NU: f64 = 2.05;
const MAX_NU: f64 = 100.0;
const MIN_CLAYTON: f64 = 1e-4;

/// Significance above which an edge is fixed to independence.
pub const INDEPENDENCE_LEVEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFamily {
    Independence,
    Gaussian,
    T,
    Clayton,
    Gumbel,
}

/// Candidate set used when none is given.
pub const DEFAULT_PAIR_FAMILIES: [PairFamily; 4] =
    [PairFamily::Gaussian, PairFamily::T, PairFamily::Clayton, PairFamily::Gumbel];

impl PairFamily {
    pub fn name(self) -> &'static str {
        match self {
            PairFamily::Independence => "independence",
            PairFamily::Gaussian => "gaussian",
            PairFamily::T => "t",
            PairFamily::Clayton => "clayton",
            PairFamily::Gumbel => "gumbel",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            PairFamily::Independence => 0,
            PairFamily::T => 2,
            _ => 1,
        }
    }

    fn is_archimedean(self) -> bool {
        matches!(self, PairFamily::Clayton | PairFamily::Gumbel)
    }
}

impl fmt::Display for PairFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "indep" => Ok(PairFamily::Independence),
            "gaussian" | "normal" => Ok(PairFamily::Gaussian),
            "t" | "student_t" => Ok(PairFamily::T),
            "clayton" => Ok(PairFamily::Clayton),
            "gumbel" => Ok(PairFamily::Gumbel),
            other => Err(Error::ConfigError(format!("unknown pair-copula family '{other}'"))),
        }
    }
}

/// A bivariate copula `C(u, v)`, possibly rotated by 90, 180 or 270 degrees.
///
/// Rotations follow the usual convention: 90 has density `c(1−u, v)`, 180 is
/// the survival copula with density `c(1−u, 1−v)`, 270 has density `c(u, 1−v)`.
/// `params` is `[ρ]`, `[ρ, ν]`, `[δ]` or empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCopula {
    pub family: PairFamily,
    #[serde(default)]
    pub rotation: u16,
    pub params: Vec<f64>,
}

impl PairCopula {
    pub fn new(family: PairFamily, rotation: u16, params: Vec<f64>) -> Result<Self> {
        let p = PairCopula { family, rotation, params };
        p.validate()?;
        Ok(p)
    }

    pub fn independence() -> Self {
        PairCopula { family: PairFamily::Independence, rotation: 0, params: Vec::new() }
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        Self::new(PairFamily::Gaussian, 0, vec![rho])
    }

    pub fn t(rho: f64, nu: f64) -> Result<Self> {
        Self::new(PairFamily::T, 0, vec![rho, nu])
    }

    pub fn clayton(delta: f64, rotation: u16) -> Result<Self> {
        Self::new(PairFamily::Clayton, rotation, vec![delta])
    }

    pub fn gumbel(delta: f64, rotation: u16) -> Result<Self> {
        Self::new(PairFamily::Gumbel, rotation, vec![delta])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        if self.params.len() != self.family.n_params() {
            return bad(format!("{} pair takes {} parameters, got {}", self.family, self.family.n_params(), self.params.len()));
        }
        if !matches!(self.rotation, 0 | 90 | 180 | 270) {
            return bad(format!("rotation must be 0, 90, 180 or 270, got {}", self.rotation));
        }
        if self.rotation != 0 && !self.family.is_archimedean() {
            return bad(format!("{} pairs are not rotated", self.family));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return bad("non-finite pair parameter".into());
        }
        match self.family {
            PairFamily::Gaussian | PairFamily::T if self.params[0].abs() >= 1.0 => {
                bad(format!("correlation {} outside (-1, 1)", self.params[0]))
            }
            PairFamily::T if self.params[1] <= 2.0 => bad(format!("t degrees of freedom {} must exceed 2", self.params[1])),
            PairFamily::Clayton if self.params[0] <= 0.0 => bad(format!("clayton delta {} must be positive", self.params[0])),
            PairFamily::Gumbel if self.params[0] < 1.0 => bad(format!("gumbel delta {} must be at least 1", self.params[0])),
            _ => Ok(()),
        }
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    /// Kendall's τ, negated by the 90 and 270 degree rotations.
    pub fn kendall_tau(&self) -> f64 {
        let base = match self.family {
            PairFamily::Independence => 0.0,
            PairFamily::Gaussian | PairFamily::T => 2.0 / PI * self.params[0].asin(),
            PairFamily::Clayton => self.params[0] / (self.params[0] + 2.0),
            PairFamily::Gumbel => 1.0 - 1.0 / self.params[0],
        };
        if matches!(self.rotation, 90 | 270) {
            -base
        } else {
            base
        }
    }

    /// Rotation of the transposed copula `C(v, u)`.
    fn transposed_rotation(&self) -> u16 {
        match self.rotation {
            90 => 270,
            270 => 90,
            r => r,
        }
    }

    pub(crate) fn ln_density_unchecked(&self, u: f64, v: f64) -> f64 {
        let (a, b) = match self.rotation {
            90 => (1.0 - u, v),
            180 => (1.0 - u, 1.0 - v),
            270 => (u, 1.0 - v),
            _ => (u, v),
        };
        base_ln_density(self.family, &self.params, a, b)
    }

    pub fn ln_density(&self, u: f64, v: f64) -> Result<f64> {
        check_unit(u, v)?;
        Ok(self.ln_density_unchecked(u, v))
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.ln_density(u, v)?.exp())
    }

    /// `P(U ≤ u | V = v) = ∂C(u, v)/∂v`.
    pub(crate) fn cond_first(&self, u: f64, v: f64) -> f64 {
        let h = |a, b| base_h(self.family, &self.params, a, b);
        let r = match self.rotation {
            90 => 1.0 - h(1.0 - u, v),
            180 => 1.0 - h(1.0 - u, 1.0 - v),
            270 => h(u, 1.0 - v),
            _ => h(u, v),
        };
        r.clamp(EDGE, 1.0 - EDGE)
    }

    /// `P(V ≤ v | U = u) = ∂C(u, v)/∂u`.
    pub(crate) fn cond_second(&self, u: f64, v: f64) -> f64 {
        self.transposed().cond_first(v, u)
    }

    /// Solves `cond_first(u, v) = w` for `u`.
    pub(crate) fn cond_first_inv(&self, w: f64, v: f64) -> f64 {
        let hi = |a, b| base_h_inv(self.family, &self.params, a, b);
        let r = match self.rotation {
            90 => 1.0 - hi(1.0 - w, v),
            180 => 1.0 - hi(1.0 - w, 1.0 - v),
            270 => hi(w, 1.0 - v),
            _ => hi(w, v),
        };
        r.clamp(EDGE, 1.0 - EDGE)
    }

    /// Solves `cond_second(u, v) = w` for `v`.
    pub(crate) fn cond_second_inv(&self, u: f64, w: f64) -> f64 {
        self.transposed().cond_first_inv(w, u)
    }

    fn transposed(&self) -> PairCopula {
        // every base family is exchangeable, so only the rotation changes
        PairCopula { family: self.family, rotation: self.transposed_rotation(), params: self.params.clone() }
    }
}

fn check_unit(u: f64, v: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("pair-copula arguments ({u}, {v}) must lie strictly inside (0, 1)")))
    }
}

/// `h(u | v) = ∂C(u, v)/∂v`, the conditional distribution of the first
/// argument given the second.
pub fn h_function(pair: &PairCopula, u: f64, v: f64) -> Result<f64> {
    check_unit(u, v)?;
    pair.validate()?;
    Ok(pair.cond_first(u, v))
}

/// Inverse of [`h_function`] in its first argument.
pub fn h_inverse(pair: &PairCopula, w: f64, v: f64) -> Result<f64> {
    check_unit(w, v)?;
    pair.validate()?;
    Ok(pair.cond_first_inv(w, v))
}

/// Constant of the bivariate t density divided by its two margins.
fn t_ln_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

fn t_ln_density_xy(x: f64, y: f64, rho: f64, nu: f64, norm: f64) -> f64 {
    let one = 1.0 - rho * rho;
    let q = (x * x + y * y - 2.0 * rho * x * y) / (nu * one);
    norm - 0.5 * one.ln() - 0.5 * (nu + 2.0) * q.ln_1p()
        + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

fn gaussian_ln_density_xy(x: f64, y: f64, rho: f64) -> f64 {
    let one = 1.0 - rho * rho;
    -0.5 * one.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one)
}

fn clayton_ln_density(u: f64, v: f64, d: f64) -> f64 {
    let (lu, lv) = (u.ln(), v.ln());
    let s = (-d * lu).exp_m1() + (-d * lv).exp_m1() + 1.0;
    d.ln_1p() - (1.0 + d) * (lu + lv) - (2.0 + 1.0 / d) * s.ln()
}

fn gumbel_ln_density(u: f64, v: f64, d: f64) -> f64 {
    let (x, y) = (-u.ln(), -v.ln());
    let s = x.powf(d) + y.powf(d);
    let a = s.powf(1.0 / d);
    -a + x + y + (d - 1.0) * (x.ln() + y.ln()) + (1.0 / d - 2.0) * s.ln() + (a + d - 1.0).ln()
}

fn base_ln_density(family: PairFamily, p: &[f64], u: f64, v: f64) -> f64 {
    match family {
        PairFamily::Independence => 0.0,
        PairFamily::Gaussian => gaussian_ln_density_xy(norm_quantile(u), norm_quantile(v), p[0]),
        PairFamily::T => {
            let nu = p[1];
            t_ln_density_xy(student_t_quantile(u, nu), student_t_quantile(v, nu), p[0], nu, t_ln_norm(nu))
        }
        PairFamily::Clayton => clayton_ln_density(u, v, p[0]),
        PairFamily::Gumbel => gumbel_ln_density(u, v, p[0]),
    }
}

fn base_h(family: PairFamily, p: &[f64], u: f64, v: f64) -> f64 {
    match family {
        PairFamily::Independence => u,
        PairFamily::Gaussian => {
            let rho = p[0];
            norm_cdf((norm_quantile(u) - rho * norm_quantile(v)) / (1.0 - rho * rho).sqrt())
        }
        PairFamily::T => {
            let (rho, nu) = (p[0], p[1]);
            let x = student_t_quantile(u, nu);
            let y = student_t_quantile(v, nu);
            let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            student_t_cdf((x - rho * y) / scale, nu + 1.0)
        }
        PairFamily::Clayton => {
            let d = p[0];
            let (lu, lv) = (u.ln(), v.ln());
            let s = (-d * lu).exp_m1() + (-d * lv).exp_m1() + 1.0;
            ((-d - 1.0) * lv - (1.0 + 1.0 / d) * s.ln()).exp()
        }
        PairFamily::Gumbel => {
            let d = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let s = x.powf(d) + y.powf(d);
            (-s.powf(1.0 / d) + y + (d - 1.0) * y.ln() + (1.0 / d - 1.0) * s.ln()).exp()
        }
    }
}

fn base_h_inv(family: PairFamily, p: &[f64], w: f64, v: f64) -> f64 {
    match family {
        PairFamily::Independence => w,
        PairFamily::Gaussian => {
            let rho = p[0];
            norm_cdf(norm_quantile(w) * (1.0 - rho * rho).sqrt() + rho * norm_quantile(v))
        }
        PairFamily::T => {
            let (rho, nu) = (p[0], p[1]);
            let y = student_t_quantile(v, nu);
            let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            student_t_cdf(student_t_quantile(w, nu + 1.0) * scale + rho * y, nu)
        }
        PairFamily::Clayton => {
            let d = p[0];
            let (lw, lv) = (w.ln(), v.ln());
            // (w v^{δ+1})^{−δ/(1+δ)} − v^{−δ} + 1
            let s = (-d / (1.0 + d) * (lw + (d + 1.0) * lv)).exp() - (-d * lv).exp_m1();
            (-s.ln() / d).exp()
        }
        PairFamily::Gumbel => bisect(|u| base_h(family, p, u, v) - w),
    }
}

/// Root of an increasing function on (0, 1) to 1e-10.
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid.clamp(EDGE, 1.0 - EDGE)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).clamp(EDGE, 1.0 - EDGE)
}

/// Two-sided p-value of the asymptotic τ test of independence.
pub fn independence_p_value(tau: f64, n: usize) -> f64 {
    let n = n as f64;
    let sd = (2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0))).sqrt();
    2.0 * norm_cdf(-tau.abs() / sd)
}

/// A pair copula chosen for one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFit {
    pub copula: PairCopula,
    pub loglik: f64,
    /// Every candidate failed and the edge was set to independence.
    pub fallback: bool,
}

impl PairFit {
    pub fn aic(&self) -> f64 {
        2.0 * self.copula.n_params() as f64 - 2.0 * self.loglik
    }
}

fn rotate(u: &[f64], v: &[f64], rotation: u16) -> (Vec<f64>, Vec<f64>) {
    let flip = |x: &[f64], yes: bool| x.iter().map(|&a| if yes { 1.0 - a } else { a }).collect::<Vec<f64>>();
    (flip(u, matches!(rotation, 90 | 180)), flip(v, matches!(rotation, 180 | 270)))
}

/// Maximum-likelihood fit of one family and rotation. Returns `None` when the
/// optimum is not finite.
pub fn fit_pair_family(u: &[f64], v: &[f64], family: PairFamily, rotation: u16) -> Option<(PairCopula, f64)> {
    let (a, b) = rotate(u, v, rotation);
    let tau = kendall_tau(&a, &b);
    let (params, ll) = match family {
        PairFamily::Independence => (Vec::new(), 0.0),
        PairFamily::Gaussian => {
            let x: Vec<f64> = a.iter().map(|&p| norm_quantile(p)).collect();
            let y: Vec<f64> = b.iter().map(|&p| norm_quantile(p)).collect();
            let (sxx, syy, sxy) = moments(&x, &y);
            let n = x.len() as f64;
            let nll = |r: f64| {
                let one = 1.0 - r * r;
                0.5 * n * one.ln() + (r * r * (sxx + syy) - 2.0 * r * sxy) / (2.0 * one)
            };
            let (r, f) = brent_minimize(nll, -MAX_RHO, MAX_RHO, 1e-10);
            (vec![r], -f)
        }
        PairFamily::T => fit_t(&a, &b, tau),
        PairFamily::Clayton => {
            let nll = |ld: f64| -a.iter().zip(&b).map(|(&p, &q)| clayton_ln_density(p, q, ld.exp())).sum::<f64>();
            let (ld, f) = brent_minimize(nll, MIN_CLAYTON.ln(), MAX_ARCHIMEDEAN_DELTA.ln(), 1e-9);
            (vec![ld.exp()], -f)
        }
        PairFamily::Gumbel => {
            let nll = |d: f64| -a.iter().zip(&b).map(|(&p, &q)| gumbel_ln_density(p, q, d)).sum::<f64>();
            let (d, f) = brent_minimize(nll, 1.0, MAX_ARCHIMEDEAN_DELTA, 1e-9);
            (vec![d], -f)
        }
    };
    if !ll.is_finite() {
        return None;
    }
    PairCopula::new(family, rotation, params).ok().map(|c| (c, ll))
}

fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    x.iter().zip(y).fold((0.0, 0.0, 0.0), |(a, b, c), (&p, &q)| (a + p * p, b + q * q, c + p * q))
}

/// Alternates Brent searches over `ln ν` and `ρ`, starting from the τ inversion.
fn fit_t(a: &[f64], b: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let ll = |x: &[f64], y: &[f64], rho: f64, nu: f64| {
        let norm = t_ln_norm(nu);
        x.iter().zip(y).map(|(&p, &q)| t_ln_density_xy(p, q, rho, nu, norm)).sum::<f64>()
    };
    let scores = |nu: f64| -> (Vec<f64>, Vec<f64>) {
        (a.iter().map(|&p| student_t_quantile(p, nu)).collect(), b.iter().map(|&p| student_t_quantile(p, nu)).collect())
    };
    let mut rho = (0.5 * PI * tau).sin().clamp(-MAX_RHO, MAX_RHO);
    let mut nu = 8.0f64;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..2 {
        let (lnu, _) = brent_minimize(
            |l| {
                let (x, y) = scores(l.exp());
                -ll(&x, &y, rho, l.exp())
            },
            MIN_NU.ln(),
            MAX_NU.ln(),
            1e-4,
        );
        nu = lnu.exp();
        let (x, y) = scores(nu);
        let (r, f) = brent_minimize(|r| -ll(&x, &y, r, nu), -MAX_RHO, MAX_RHO, 1e-8);
        rho = r;
        best = -f;
    }
    (vec![rho, nu], best)
}

/// Chooses the edge copula by AIC among `families` (rotations of the
/// archimedean ones matching the sign of τ), after fixing clearly
/// independent edges to independence.
pub fn select_pair(u: &[f64], v: &[f64], families: &[PairFamily]) -> PairFit {
    let tau = kendall_tau(u, v);
    let indep = PairFit { copula: PairCopula::independence(), loglik: 0.0, fallback: false };
    if independence_p_value(tau, u.len()) > INDEPENDENCE_LEVEL {
        return indep;
    }
    let mut tried = 0;
    let mut best: Option<PairFit> = None;
    if families.contains(&PairFamily::Independence) {
        best = Some(indep);
    }
    for &f in families {
        let rotations: &[u16] = match f {
            PairFamily::Independence => continue,
            PairFamily::Gaussian | PairFamily::T => &[0],
            _ if tau >= 0.0 => &[0, 180],
            _ => &[90, 270],
        };
        for &r in rotations {
            tried += 1;
            if let Some((copula, loglik)) = fit_pair_family(u, v, f, r) {
                let fit = PairFit { copula, loglik, fallback: false };
                if best.as_ref().is_none_or(|b| fit.aic() < b.aic()) {
                    best = Some(fit);
                }
            }
        }
    }
    best.unwrap_or(PairFit { copula: PairCopula::independence(), loglik: 0.0, fallback: tried > 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_pairs() -> Vec<PairCopula> {
        let mut v = vec![PairCopula::independence(), PairCopula::gaussian(0.6).unwrap(), PairCopula::t(-0.4, 5.0).unwrap()];
        for r in [0, 90, 180, 270] {
            v.push(PairCopula::clayton(2.5, r).unwrap());
            v.push(PairCopula::gumbel(1.8, r).unwrap());
        }
        v
    }

    #[test]
    fn h_function_examples() {
        assert_eq!(h_function(&PairCopula::independence(), 0.3, 0.8).unwrap(), 0.3);
        assert!((h_function(&PairCopula::gaussian(0.0).unwrap(), 0.3, 0.8).unwrap() - 0.3).abs() < 1e-14);
        assert!((h_function(&PairCopula::gaussian(0.5).unwrap(), 0.5, 0.5).unwrap() - 0.5).abs() < 1e-14);
        assert!(h_function(&PairCopula::gaussian(0.5).unwrap(), 0.0, 0.5).is_err());
    }

    #[test]
    fn h_inverse_round_trips() {
        for p in all_pairs() {
            for &(u, v) in &[(0.2, 0.7), (0.9, 0.1), (0.5, 0.5), (0.01, 0.99)] {
                let w = p.cond_first(u, v);
                assert!((p.cond_first_inv(w, v) - u).abs() < 1e-8, "{p:?} first at ({u},{v})");
                let w = p.cond_second(u, v);
                assert!((p.cond_second_inv(u, w) - v).abs() < 1e-8, "{p:?} second at ({u},{v})");
            }
        }
    }

    #[test]
    fn h_is_derivative_of_density() {
        // ∂h(u|v)/∂u = c(u, v) and ∂h(v|u)/∂v = c(u, v)
        let e = 1e-6;
        for p in all_pairs() {
            for &(u, v) in &[(0.3, 0.6), (0.8, 0.25)] {
                let c = p.density(u, v).unwrap();
                let d1 = (p.cond_first(u + e, v) - p.cond_first(u - e, v)) / (2.0 * e);
                let d2 = (p.cond_second(u, v + e) - p.cond_second(u, v - e)) / (2.0 * e);
                assert!((d1 - c).abs() < 1e-5 * c.max(1.0), "{p:?}: {d1} vs {c}");
                assert!((d2 - c).abs() < 1e-5 * c.max(1.0), "{p:?}: {d2} vs {c}");
            }
        }
    }

    #[test]
    fn rotations_flip_tau() {
        let c = PairCopula::clayton(2.0, 0).unwrap();
        assert!((c.kendall_tau() - 0.5).abs() < 1e-15);
        assert!((PairCopula::clayton(2.0, 90).unwrap().kendall_tau() + 0.5).abs() < 1e-15);
        assert!(PairCopula::gaussian(0.2).unwrap().rotation == 0);
        assert!(PairCopula::new(PairFamily::Gaussian, 90, vec![0.2]).is_err());
        assert!(PairCopula::clayton(2.0, 45).is_err());
    }

    #[test]
    fn independence_p_value_is_symmetric() {
        assert!((independence_p_value(0.0, 500) - 1.0).abs() < 1e-15);
        assert_eq!(independence_p_value(0.1, 500), independence_p_value(-0.1, 500));
        assert!(independence_p_value(0.2, 500) < 1e-6);
    }

    #[test]
    fn family_names_round_trip() {
        for f in [PairFamily::Independence, PairFamily::Gaussian, PairFamily::T, PairFamily::Clayton, PairFamily::Gumbel] {
            assert_eq!(f.name().parse::<PairFamily>().unwrap(), f);
        }
    }
}
