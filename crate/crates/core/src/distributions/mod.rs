//! Location-scale innovation families: densities, CDFs, quantiles, sampling,
//! maximum-likelihood fitting and the two uniformity tests used on PITs.
//!
//! Every family is `X = a + b·Z`. The symmetric bases are standardized to unit
//! variance:
//!
//! * normal: `φ(z)`.
//! * Student t with `d > 2` degrees of freedom: `t_d(z/s)/s`, `s = √((d−2)/d)`.
//! * GED with exponent `ν > 0`:
//!   `ν·exp(−½|z/λ|^ν) / (λ·2^{1+1/ν}·Γ(1/ν))`, `λ = √(2^{−2/ν}Γ(1/ν)/Γ(3/ν))`.
//!   `ν = 2` is the standard normal, `ν = 1` the Laplace.
//!
//! The skewed families apply Azzalini's mechanism to a base `f0` with CDF
//! `F0`: `f(z) = 2·f0(z)·F0(c·z)`. The shape `c` is stored in `DistSpec::c`
//! and the tail parameter (t degrees of freedom, GED exponent) in
//! `DistSpec::d`. Unused parameters are kept at zero.

mod fit;
mod gof;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::quad;
use crate::numeric::special::{
    norm_cdf, norm_ln_cdf, norm_pdf, norm_quantile, owens_t, student_t_cdf, student_t_ln_pdf, student_t_pdf,
    student_t_quantile, LN_SQRT_2PI,
};
use crate::rng;

pub use fit::{fit_mle, FittedDist, MIN_FIT_OBS};
pub use gof::{
    ks_test, ks_test_with, kolmogorov_survival, pit_uniformity_test, select_pit_family, CandidateReport,
    PitSelection, TestResult, DEFAULT_PIT_BINS, PIT_CANDIDATES, PIT_CLAMP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    SkewNormal,
    StudentT,
    SkewT,
    Ged,
    SkewGed,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Normal,
        Family::SkewNormal,
        Family::StudentT,
        Family::SkewT,
        Family::Ged,
        Family::SkewGed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::SkewNormal => "skew_normal",
            Family::StudentT => "student_t",
            Family::SkewT => "skew_t",
            Family::Ged => "ged",
            Family::SkewGed => "skew_ged",
        }
    }

    pub fn is_skewed(self) -> bool {
        matches!(self, Family::SkewNormal | Family::SkewT | Family::SkewGed)
    }

    pub fn has_tail(self) -> bool {
        !matches!(self, Family::Normal | Family::SkewNormal)
    }

    /// Number of free parameters including location and scale.
    pub fn n_params(self) -> usize {
        2 + usize::from(self.is_skewed()) + usize::from(self.has_tail())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameters(format!("unknown distribution family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub family: Family,
    /// Location.
    pub a: f64,
    /// Scale.
    pub b: f64,
    /// Skewing shape (skew families only).
    pub c: f64,
    /// Degrees of freedom (t families) or exponent (GED families).
    pub d: f64,
}

impl DistSpec {
    pub fn normal(a: f64, b: f64) -> Self {
        DistSpec { family: Family::Normal, a, b, c: 0.0, d: 0.0 }
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0)
    }

    pub fn skew_normal(a: f64, b: f64, c: f64) -> Self {
        DistSpec { family: Family::SkewNormal, a, b, c, d: 0.0 }
    }

    pub fn student_t(a: f64, b: f64, dof: f64) -> Self {
        DistSpec { family: Family::StudentT, a, b, c: 0.0, d: dof }
    }

    pub fn skew_t(a: f64, b: f64, c: f64, dof: f64) -> Self {
        DistSpec { family: Family::SkewT, a, b, c, d: dof }
    }

    pub fn ged(a: f64, b: f64, nu: f64) -> Self {
        DistSpec { family: Family::Ged, a, b, c: 0.0, d: nu }
    }

    pub fn skew_ged(a: f64, b: f64, c: f64, nu: f64) -> Self {
        DistSpec { family: Family::SkewGed, a, b, c, d: nu }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        if !self.a.is_finite() {
            return bad(format!("{}: location must be finite", self.family));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad(format!("{}: scale must be positive, got {}", self.family, self.b));
        }
        if self.family.is_skewed() && !self.c.is_finite() {
            return bad(format!("{}: shape must be finite", self.family));
        }
        match self.family {
            Family::StudentT | Family::SkewT if !(self.d > 2.0 && self.d.is_finite()) => {
                bad(format!("{}: degrees of freedom must exceed 2, got {}", self.family, self.d))
            }
            Family::Ged | Family::SkewGed if !(self.d > 0.0 && self.d.is_finite()) => {
                bad(format!("{}: exponent must be positive, got {}", self.family, self.d))
            }
            _ => Ok(()),
        }
    }

    fn base(&self) -> Base {
        match self.family {
            Family::Normal | Family::SkewNormal => Base::Normal,
            Family::StudentT | Family::SkewT => Base::t(self.d),
            Family::Ged | Family::SkewGed => Base::ged(self.d),
        }
    }

    fn shape(&self) -> f64 {
        if self.family.is_skewed() {
            self.c
        } else {
            0.0
        }
    }

    /// Density of the standardized variable `z = (x − a)/b`.
    pub fn std_pdf(&self, z: f64) -> f64 {
        self.std_ln_pdf(z).exp()
    }

    pub fn std_ln_pdf(&self, z: f64) -> f64 {
        let base = self.base();
        if self.family.is_skewed() {
            std::f64::consts::LN_2 + base.ln_pdf(z) + base.ln_cdf(self.c * z)
        } else {
            base.ln_pdf(z)
        }
    }

    pub fn std_cdf(&self, z: f64) -> f64 {
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        let c = self.shape();
        match self.family {
            Family::Normal => norm_cdf(z),
            Family::StudentT | Family::Ged => self.base().cdf(z),
            Family::SkewNormal => (norm_cdf(z) - 2.0 * owens_t(z, c)).clamp(0.0, 1.0),
            Family::SkewT | Family::SkewGed => {
                if c == 0.0 {
                    return self.base().cdf(z);
                }
                let f = |t: f64| self.std_pdf(t);
                let v = if z <= 0.0 {
                    quad::integrate_lower_tail(f, z, 1e-15, 1e-12)
                } else {
                    1.0 - quad::integrate_upper_tail(f, z, 1e-15, 1e-12)
                };
                v.clamp(0.0, 1.0)
            }
        }
    }

    pub fn std_quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::DomainError(format!("quantile level {u} outside (0, 1)")));
        }
        Ok(match self.family {
            Family::Normal => norm_quantile(u),
            Family::StudentT => student_t_quantile(u, self.d) * Base::t_scale(self.d),
            _ => self.solve_quantile(u),
        })
    }

    fn solve_quantile(&self, u: f64) -> f64 {
        let guess = norm_quantile(u) + self.mean_std_guess();
        let mut lo = guess - 1.0;
        let mut hi = guess + 1.0;
        let mut step = 1.0;
        while self.std_cdf(lo) > u {
            hi = lo;
            step *= 2.0;
            lo -= step;
        }
        step = 1.0;
        while self.std_cdf(hi) < u {
            lo = hi;
            step *= 2.0;
            hi += step;
        }
        let mut z = guess.clamp(lo, hi);
        for _ in 0..200 {
            let f = self.std_cdf(z) - u;
            if f == 0.0 {
                return z;
            }
            if f < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let p = self.std_pdf(z);
            let newton = z - f / p;
            let next = if p > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - z).abs() <= 1e-14 * (1.0 + z.abs()) || hi - lo <= 1e-14 * (1.0 + z.abs()) {
                return next;
            }
            z = next;
        }
        z
    }

    // Rough mean of the standardized skewed variable, only used to seed root finding.
    fn mean_std_guess(&self) -> f64 {
        let c = self.shape();
        let delta = c / (1.0 + c * c).sqrt();
        delta * (2.0 / std::f64::consts::PI).sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.std_pdf((x - self.a) / self.b) / self.b
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.std_ln_pdf((x - self.a) / self.b) - self.b.ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.std_cdf((x - self.a) / self.b)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.a + self.b * self.std_quantile(u)?)
    }

    /// One standardized draw (before location and scale).
    pub fn std_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let base = self.base();
        let x = base.draw(rng);
        if !self.family.is_skewed() {
            return x;
        }
        let y = base.draw(rng);
        if y <= self.c * x {
            x
        } else {
            -x
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameters("sample size must be at least 1".into()));
        }
        let mut r = rng::seeded(seed);
        Ok((0..n).map(|_| self.a + self.b * self.std_draw(&mut r)).collect())
    }

    /// Mean of the standardized variable.
    pub fn std_mean(&self) -> f64 {
        if !self.family.is_skewed() || self.c == 0.0 {
            return 0.0;
        }
        if self.family == Family::SkewNormal {
            return self.mean_std_guess();
        }
        // E[Z] = E[|X|·(2·F0(c|X|) − 1)] for the symmetric base X.
        let base = self.base();
        let c = self.c;
        2.0 * quad::integrate_upper_tail(|t| t * base.pdf(t) * (2.0 * base.cdf(c * t) - 1.0), 0.0, 1e-14, 1e-12)
    }
}

/// Symmetric unit-variance base density.
#[derive(Debug, Clone, Copy)]
enum Base {
    Normal,
    T { dof: f64, scale: f64 },
    Ged { nu: f64, lambda: f64, ln_norm: f64 },
}

impl Base {
    fn t_scale(dof: f64) -> f64 {
        ((dof - 2.0) / dof).sqrt()
    }

    fn t(dof: f64) -> Base {
        Base::T { dof, scale: Self::t_scale(dof) }
    }

    fn ged(nu: f64) -> Base {
        let lambda = ged_lambda(nu);
        let ln_norm = nu.ln() - lambda.ln() - (1.0 + 1.0 / nu) * std::f64::consts::LN_2 - ln_gamma(1.0 / nu);
        Base::Ged { nu, lambda, ln_norm }
    }

    fn ln_pdf(&self, z: f64) -> f64 {
        match *self {
            Base::Normal => -0.5 * z * z - LN_SQRT_2PI,
            Base::T { dof, scale } => student_t_ln_pdf(z / scale, dof) - scale.ln(),
            Base::Ged { nu, lambda, ln_norm } => ln_norm - 0.5 * (z.abs() / lambda).powf(nu),
        }
    }

    fn pdf(&self, z: f64) -> f64 {
        match *self {
            Base::Normal => norm_pdf(z),
            Base::T { dof, scale } => student_t_pdf(z / scale, dof) / scale,
            Base::Ged { .. } => self.ln_pdf(z).exp(),
        }
    }

    fn cdf(&self, z: f64) -> f64 {
        match *self {
            Base::Normal => norm_cdf(z),
            Base::T { dof, scale } => student_t_cdf(z / scale, dof),
            Base::Ged { nu, lambda, .. } => {
                let w = 0.5 * (z.abs() / lambda).powf(nu);
                if w == 0.0 {
                    return 0.5;
                }
                let tail = 0.5 * gamma_ur(1.0 / nu, w);
                if z < 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
        }
    }

    fn ln_cdf(&self, z: f64) -> f64 {
        match *self {
            Base::Normal => norm_ln_cdf(z),
            Base::Ged { nu, lambda, .. } if z < 0.0 => {
                let w = 0.5 * (z.abs() / lambda).powf(nu);
                let a = 1.0 / nu;
                let q = gamma_ur(a, w);
                if q > 1e-300 {
                    (0.5 * q).ln()
                } else {
                    // Leading term of the incomplete-gamma asymptotic expansion.
                    (a - 1.0) * w.ln() - w - ln_gamma(a) - std::f64::consts::LN_2
                }
            }
            _ => self.cdf(z).max(1e-300).ln(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Base::Normal => rng.sample(StandardNormal),
            Base::T { dof, scale } => {
                let t = StudentT::new(dof).expect("dof validated");
                scale * t.sample(rng)
            }
            Base::Ged { nu, lambda, .. } => {
                let g: f64 = Gamma::new(1.0 / nu, 1.0).expect("shape validated").sample(rng);
                let m = lambda * (2.0 * g).powf(1.0 / nu);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
        }
    }
}

fn ged_lambda(nu: f64) -> f64 {
    ((-2.0 / nu) * std::f64::consts::LN_2 + ln_gamma(1.0 / nu) - ln_gamma(3.0 / nu))
        .exp()
        .sqrt()
}

/// Excess kurtosis of the unit-variance GED with exponent `nu`.
pub(crate) fn ged_excess_kurtosis(nu: f64) -> f64 {
    (ln_gamma(5.0 / nu) + ln_gamma(1.0 / nu) - 2.0 * ln_gamma(3.0 / nu)).exp() - 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::INV_SQRT_2PI;
    use proptest::prelude::*;

    #[test]
    fn normal_cdf_at_center() {
        assert_eq!(DistSpec::standard_normal().cdf(0.0), 0.5);
    }

    #[test]
    fn zero_shape_skew_normal_is_normal() {
        let sn = DistSpec::skew_normal(0.0, 1.0, 0.0);
        let n = DistSpec::standard_normal();
        for x in [-1.0, 0.0, 1.0] {
            assert!((sn.pdf(x) - n.pdf(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn ged_two_is_normal() {
        let g = DistSpec::ged(0.0, 1.0, 2.0);
        assert!((g.pdf(0.0) - INV_SQRT_2PI).abs() < 1e-14);
        for x in [-2.5, -0.3, 1.7] {
            assert!((g.pdf(x) - norm_pdf(x)).abs() < 1e-13);
            assert!((g.cdf(x) - norm_cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ged_one_is_laplace() {
        // Unit-variance Laplace: scale 1/√2.
        let g = DistSpec::ged(0.0, 1.0, 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for x in [-2.0, -0.5, 0.4, 3.0] {
            let f = (-f64::abs(x) / s).exp() / (2.0 * s);
            assert!((g.pdf(x) - f).abs() < 1e-13);
        }
    }

    #[test]
    fn standardized_bases_have_unit_variance() {
        for spec in [DistSpec::student_t(0.0, 1.0, 5.0), DistSpec::ged(0.0, 1.0, 1.3)] {
            let v = quad::integrate_lower_tail(|z| z * z * spec.pdf(z), 0.0, 1e-14, 1e-12)
                + quad::integrate_upper_tail(|z| z * z * spec.pdf(z), 0.0, 1e-14, 1e-12);
            assert!((v - 1.0).abs() < 1e-6, "{spec:?}: {v}");
        }
    }

    #[test]
    fn skew_t_cdf_matches_direct_integration() {
        let spec = DistSpec::skew_t(0.3, 1.5, -1.2, 6.0);
        for x in [-4.0, -1.0, 0.2, 2.5] {
            let direct = quad::integrate(|t| spec.pdf(t), -400.0, x, 1e-14, 1e-13)
                + quad::integrate_lower_tail(|t| spec.pdf(t), -400.0, 1e-16, 1e-12);
            assert!((spec.cdf(x) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn std_mean_matches_numeric_mean() {
        for spec in [
            DistSpec::skew_normal(0.0, 1.0, 2.0),
            DistSpec::skew_t(0.0, 1.0, -1.5, 7.0),
            DistSpec::skew_ged(0.0, 1.0, 0.8, 1.4),
        ] {
            let m = quad::integrate_upper_tail(|z| z * spec.pdf(z), 0.0, 1e-14, 1e-12)
                + quad::integrate_lower_tail(|z| z * spec.pdf(z), 0.0, 1e-14, 1e-12);
            assert!((spec.std_mean() - m).abs() < 1e-8, "{spec:?} {} {m}", spec.std_mean());
        }
    }

    #[test]
    fn quantile_domain() {
        let s = DistSpec::standard_normal();
        assert!(matches!(s.quantile(0.0), Err(Error::DomainError(_))));
        assert!(matches!(s.quantile(1.0), Err(Error::DomainError(_))));
        assert!(matches!(DistSpec::student_t(0.0, 1.0, 2.0).quantile(0.5), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = DistSpec::skew_ged(0.1, 2.0, 1.0, 1.5);
        assert_eq!(s.sample(100, 9).unwrap(), s.sample(100, 9).unwrap());
        assert_ne!(s.sample(100, 9).unwrap(), s.sample(100, 10).unwrap());
    }

    #[test]
    fn ged_kurtosis_formula() {
        assert!(ged_excess_kurtosis(2.0).abs() < 1e-12);
        assert!((ged_excess_kurtosis(1.0) - 3.0).abs() < 1e-12);
    }

    fn any_spec() -> impl Strategy<Value = DistSpec> {
        (0usize..6, -2.0f64..2.0, 0.2f64..3.0, -3.0f64..3.0, 4.0f64..30.0, 1.0f64..4.0).prop_map(
            |(f, a, b, c, dof, nu)| match Family::ALL[f] {
                Family::Normal => DistSpec::normal(a, b),
                Family::SkewNormal => DistSpec::skew_normal(a, b, c),
                Family::StudentT => DistSpec::student_t(a, b, dof),
                Family::SkewT => DistSpec::skew_t(a, b, c, dof),
                Family::Ged => DistSpec::ged(a, b, nu),
                Family::SkewGed => DistSpec::skew_ged(a, b, c, nu),
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cdf_is_monotone(spec in any_spec(), mut xs in prop::collection::vec(-8.0f64..8.0, 2..20)) {
            xs.sort_by(f64::total_cmp);
            let cdfs: Vec<f64> = xs.iter().map(|&x| spec.cdf(spec.a + spec.b * x)).collect();
            for w in cdfs.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-14);
            }
        }

        #[test]
        fn quantile_inverts_cdf(spec in any_spec(), u in 0.005f64..0.995) {
            let x = spec.quantile(u).unwrap();
            let back = spec.quantile(spec.cdf(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-6 * (1.0 + x.abs()), "{:?} {} {}", spec, x, back);
        }

        #[test]
        fn pdf_is_non_negative(spec in any_spec(), x in -50.0f64..50.0) {
            prop_assert!(spec.pdf(x) >= 0.0);
        }
    }
}
