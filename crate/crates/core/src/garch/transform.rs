//! Maps between unconstrained optimizer coordinates and model coefficients.
//!
//! Coordinates are laid out as `[μ, φ?, θ?, variance block, shape?]`:
//!
//! * φ, θ = tanh(x), so |φ|, |θ| < 1.
//! * garch: ω = exp(x); (α, ψ, slack) = softmax(x_α, x_ψ, 0), which gives
//!   α, ψ > 0 and Σα + Σψ < 1.
//! * igarch: ω = exp(x); (α, ψ) = softmax(x_α, x_ψ[..p−1], 0), so Σα + Σψ = 1.
//! * gjr: ω = exp(x); (α/2, (α+γ)/2, ψ, slack) = softmax(...), so α ≥ 0,
//!   α + γ ≥ 0 and α + γ/2 + Σψ < 1.
//! * egarch: ω, α, γ free; (ψ, slack) = softmax(x_ψ, 0).
//! * skew-normal shape free.

use serde::{Deserialize, Serialize};

use super::filter::Coefs;
use super::{ArmaSpec, GarchSpec, Innovation, InnovationSpec, ModelSpec, Variant};
use crate::numeric::dual::Real;

/// One cell of the model grid: ARMA orders, variance variant and orders, innovation law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub m: usize,
    pub n: usize,
    pub variant: Variant,
    pub q: usize,
    pub p: usize,
    pub dist: Innovation,
}

fn softmax<R: Real>(logits: &[R], with_slack: bool) -> Vec<R> {
    let mut hi = if with_slack { 0.0 } else { f64::NEG_INFINITY };
    for l in logits {
        hi = hi.max(l.value());
    }
    let ex: Vec<R> = logits.iter().map(|&l| (l - hi).exp()).collect();
    let mut total = if with_slack { R::cst((-hi).exp()) } else { R::cst(0.0) };
    for &e in &ex {
        total += e;
    }
    ex.into_iter().map(|e| e / total).collect()
}

impl Candidate {
    pub fn n_free(&self) -> usize {
        let variance = match self.variant {
            Variant::Garch => 1 + self.q + self.p,
            Variant::Igarch => self.q + self.p,
            Variant::Gjr | Variant::Egarch => 1 + 2 * self.q + self.p,
        };
        1 + self.m + self.n + variance + usize::from(self.dist == Innovation::SkewNormal)
    }

    pub(crate) fn decode<R: Real>(&self, x: &[R], abs_mean: impl Fn(R) -> R) -> Coefs<R> {
        let mut i = 0;
        let mut take = |k: usize| {
            let s = &x[i..i + k];
            i += k;
            s.to_vec()
        };
        let mean = take(1)[0];
        let ar: Vec<R> = take(self.m).into_iter().map(Real::tanh).collect();
        let ma: Vec<R> = take(self.n).into_iter().map(Real::tanh).collect();
        let (q, p) = (self.q, self.p);
        let (omega, arch, asym, garch) = match self.variant {
            Variant::Garch => {
                let omega = take(1)[0].exp();
                let w = softmax(&take(q + p), true);
                (omega, w[..q].to_vec(), vec![], w[q..].to_vec())
            }
            Variant::Igarch => {
                let omega = take(1)[0].exp();
                let mut logits = take(q + p - 1);
                logits.push(R::cst(0.0));
                let w = softmax(&logits, false);
                (omega, w[..q].to_vec(), vec![], w[q..].to_vec())
            }
            Variant::Gjr => {
                let omega = take(1)[0].exp();
                let w = softmax(&take(2 * q + p), true);
                let arch: Vec<R> = w[..q].iter().map(|&u| u * 2.0).collect();
                let asym: Vec<R> = (0..q).map(|j| (w[q + j] - w[j]) * 2.0).collect();
                (omega, arch, asym, w[2 * q..].to_vec())
            }
            Variant::Egarch => {
                let omega = take(1)[0];
                let arch = take(q);
                let asym = take(q);
                let w = softmax(&take(p), true);
                (omega, arch, asym, w)
            }
        };
        let shape = if self.dist == Innovation::SkewNormal { take(1)[0] } else { R::cst(0.0) };
        Coefs {
            variant: self.variant,
            dist: self.dist,
            mean,
            ar,
            ma,
            omega,
            arch,
            asym,
            garch,
            shape,
            abs_mean: abs_mean(shape),
        }
    }

    pub(crate) fn to_spec(&self, c: &Coefs<f64>) -> ModelSpec {
        ModelSpec {
            arma: ArmaSpec { m: self.m, n: self.n, mean: c.mean, ar: c.ar.clone(), ma: c.ma.clone() },
            garch: GarchSpec {
                variant: self.variant,
                q: self.q,
                p: self.p,
                omega: c.omega,
                arch: c.arch.clone(),
                asymmetry: c.asym.clone(),
                garch: c.garch.clone(),
            },
            innovation: InnovationSpec { dist: self.dist, shape: c.shape },
        }
    }

    /// Default starting point for data scaled to unit variance.
    pub(crate) fn start(&self, mean: f64) -> Vec<f64> {
        let (q, p) = (self.q as f64, self.p as f64);
        let ln = f64::ln;
        let mut x = vec![mean];
        x.extend(std::iter::repeat_n(0.0, self.m + self.n));
        match self.variant {
            Variant::Garch => {
                // α total 0.08, ψ total 0.88, slack 0.04.
                x.push(ln(0.04));
                x.extend(std::iter::repeat_n(ln(0.08 / q / 0.04), self.q));
                x.extend(std::iter::repeat_n(ln(0.88 / p / 0.04), self.p));
            }
            Variant::Igarch => {
                // α total 0.1, ψ total 0.9; the last ψ is the reference.
                x.push(ln(0.02));
                let last = 0.9 / p;
                x.extend(std::iter::repeat_n(ln(0.1 / q / last), self.q));
                x.extend(std::iter::repeat_n(0.0, self.p - 1));
            }
            Variant::Gjr => {
                // α = 0.04, γ = 0.08, ψ total 0.86, slack 0.04 (α/2 = 0.02, (α+γ)/2 = 0.06).
                x.push(ln(0.04));
                x.extend(std::iter::repeat_n(ln(0.02 / q / 0.04), self.q));
                x.extend(std::iter::repeat_n(ln(0.06 / q / 0.04), self.q));
                x.extend(std::iter::repeat_n(ln(0.86 / p / 0.04), self.p));
            }
            Variant::Egarch => {
                // ψ total 0.95, slack 0.05; log-variance centred on zero.
                x.push(0.0);
                x.extend(std::iter::repeat_n(-0.05 / q, self.q));
                x.extend(std::iter::repeat_n(0.15 / q, self.q));
                x.extend(std::iter::repeat_n(ln(0.95 / p / 0.05), self.p));
            }
        }
        if self.dist == Innovation::SkewNormal {
            x.push(0.0);
        }
        debug_assert_eq!(x.len(), self.n_free());
        x
    }
}
