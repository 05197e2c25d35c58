//! The one-step recursion and the likelihood filter, generic over [`Real`] so
//! the same code yields values and exact gradients.

use super::{Innovation, ModelSpec, Presample, Variant, MAX_ORDER};
use crate::numeric::dual::Real;
use crate::numeric::special::{norm_hazard_lower, norm_ln_cdf, LN_SQRT_2PI};

/// Model coefficients in a numeric type `R`.
#[derive(Debug, Clone)]
pub(crate) struct Coefs<R> {
    pub variant: Variant,
    pub dist: Innovation,
    pub mean: R,
    pub ar: Vec<R>,
    pub ma: Vec<R>,
    pub omega: R,
    pub arch: Vec<R>,
    pub asym: Vec<R>,
    pub garch: Vec<R>,
    pub shape: R,
    /// `E|z|`, used by EGARCH.
    pub abs_mean: R,
}

impl Coefs<f64> {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        Coefs {
            variant: spec.garch.variant,
            dist: spec.innovation.dist,
            mean: spec.arma.mean,
            ar: spec.arma.ar.clone(),
            ma: spec.arma.ma.clone(),
            omega: spec.garch.omega,
            arch: spec.garch.arch.clone(),
            asym: spec.garch.asymmetry.clone(),
            garch: spec.garch.garch.clone(),
            shape: spec.innovation.shape,
            abs_mean: spec.innovation.abs_mean(),
        }
    }
}

/// Ring buffers of the last `MAX_ORDER` values; lag `j` (0 = most recent) is
/// at `(head + j) % MAX_ORDER`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lags<R> {
    head: usize,
    r: [f64; MAX_ORDER],
    e: [R; MAX_ORDER],
    h: [R; MAX_ORDER],
    ln_h: [R; MAX_ORDER],
}

impl<R: Real> Lags<R> {
    pub fn presample(pre: &Presample) -> Self {
        Lags {
            head: 0,
            r: [pre.mean; MAX_ORDER],
            e: [R::cst(0.0); MAX_ORDER],
            h: [R::cst(pre.variance); MAX_ORDER],
            ln_h: [R::cst(pre.variance.ln()); MAX_ORDER],
        }
    }

    /// Lags given most recent first.
    pub fn from_arrays(r: [f64; MAX_ORDER], e: [R; MAX_ORDER], h: [R; MAX_ORDER], ln_h: [R; MAX_ORDER]) -> Self {
        Lags { head: 0, r, e, h, ln_h }
    }

    #[inline]
    fn at(&self, j: usize) -> usize {
        (self.head + j) % MAX_ORDER
    }

    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        self.r[self.at(j)]
    }

    #[inline]
    pub fn e(&self, j: usize) -> R {
        self.e[self.at(j)]
    }

    #[inline]
    pub fn h(&self, j: usize) -> R {
        self.h[self.at(j)]
    }

    #[inline]
    pub fn ln_h(&self, j: usize) -> R {
        self.ln_h[self.at(j)]
    }

    #[inline]
    pub fn push(&mut self, r: f64, e: R, h: R, ln_h: R) {
        self.head = (self.head + MAX_ORDER - 1) % MAX_ORDER;
        let i = self.head;
        self.r[i] = r;
        self.e[i] = e;
        self.h[i] = h;
        self.ln_h[i] = ln_h;
    }
}

/// Per-evaluation constants of the innovation density.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DensityConsts<R> {
    shape: R,
    mu: R,
    sigma: R,
    offset: R,
}

impl<R: Real> Coefs<R> {
    pub fn cond_mean(&self, lags: &Lags<R>) -> R {
        let mut a = self.mean;
        for (j, phi) in self.ar.iter().enumerate() {
            a += *phi * (R::cst(lags.r(j)) - self.mean);
        }
        for (j, theta) in self.ma.iter().enumerate() {
            a += *theta * lags.e(j);
        }
        a
    }

    /// Conditional variance and its logarithm.
    pub fn cond_variance(&self, lags: &Lags<R>) -> (R, R) {
        match self.variant {
            Variant::Garch | Variant::Igarch | Variant::Gjr => {
                let mut h = self.omega;
                for (j, alpha) in self.arch.iter().enumerate() {
                    let e2 = lags.e(j) * lags.e(j);
                    h += *alpha * e2;
                    if self.variant == Variant::Gjr && lags.e(j).value() <= 0.0 {
                        h += self.asym[j] * e2;
                    }
                }
                for (j, psi) in self.garch.iter().enumerate() {
                    h += *psi * lags.h(j);
                }
                let ln_h = if h.value() > 0.0 { h.ln() } else { R::cst(f64::NAN) };
                (h, ln_h)
            }
            Variant::Egarch => {
                let mut ln_h = self.omega;
                for j in 0..self.arch.len() {
                    let z = lags.e(j) / lags.h(j).sqrt();
                    ln_h += self.arch[j] * z + self.asym[j] * (z.abs() - self.abs_mean);
                }
                for (j, psi) in self.garch.iter().enumerate() {
                    ln_h += *psi * lags.ln_h(j);
                }
                if ln_h.value() > 700.0 {
                    return (R::cst(f64::INFINITY), ln_h);
                }
                (ln_h.exp(), ln_h)
            }
        }
    }

    pub fn density_consts(&self) -> DensityConsts<R> {
        match self.dist {
            Innovation::Normal => DensityConsts {
                shape: R::cst(0.0),
                mu: R::cst(0.0),
                sigma: R::cst(1.0),
                offset: R::cst(-LN_SQRT_2PI),
            },
            Innovation::SkewNormal => {
                let c = self.shape;
                let delta = c / (c * c + 1.0).sqrt();
                let mu = delta * (2.0 / std::f64::consts::PI).sqrt();
                let sigma = (R::cst(1.0) - mu * mu).sqrt();
                DensityConsts { shape: c, mu, sigma, offset: sigma.ln() + (std::f64::consts::LN_2 - LN_SQRT_2PI) }
            }
        }
    }

    /// Log density of the standardized innovation.
    #[inline]
    pub fn ln_density(&self, k: &DensityConsts<R>, z: R) -> R {
        match self.dist {
            Innovation::Normal => z * z * -0.5 + k.offset,
            Innovation::SkewNormal => {
                let y = k.mu + k.sigma * z;
                let cy = k.shape * y;
                let ln_cdf = cy.chain(norm_ln_cdf(cy.value()), norm_hazard_lower(cy.value()));
                k.offset - y * y * 0.5 + ln_cdf
            }
        }
    }
}

/// Filtered path on the data's own scale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub cond_mean: Vec<f64>,
    pub cond_sd: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Conditional log-likelihood of `r`; `NaN`/`−∞` signals an infeasible point.
pub(crate) fn log_likelihood<R: Real>(c: &Coefs<R>, r: &[f64], pre: &Presample, mut trace: Option<&mut Trace>) -> R {
    let mut lags = Lags::<R>::presample(pre);
    let k = c.density_consts();
    let mut ll = R::cst(0.0);
    for &rt in r {
        let a = c.cond_mean(&lags);
        let (h, ln_h) = c.cond_variance(&lags);
        let hv = h.value();
        if !(hv > 0.0) || !hv.is_finite() {
            return R::cst(f64::NEG_INFINITY);
        }
        let b = h.sqrt();
        let e = R::cst(rt) - a;
        let z = e / b;
        ll += c.ln_density(&k, z) - ln_h * 0.5;
        if let Some(t) = trace.as_deref_mut() {
            t.cond_mean.push(a.value());
            t.cond_sd.push(b.value());
            t.residuals.push(z.value());
        }
        lags.push(rt, e, h, ln_h);
    }
    ll
}
