//! ARMA conditional means with GARCH, IGARCH, EGARCH and GJR conditional
//! variances: likelihood filtering, maximum-likelihood fitting, BIC selection
//! over the order grid, forecasting and path simulation.
//!
//! The model is `r_t = a_t + b_t·z_t` with
//!
//! ```text
//! a_t = μ + Σ φ_j (r_{t−j} − μ) + Σ θ_j e_{t−j},        e_t = r_t − a_t
//! garch/igarch: b_t² = ω + Σ α_j e²_{t−j} + Σ ψ_j b²_{t−j}
//! gjr:          b_t² = ω + Σ (α_j + γ_j·1[e_{t−j} ≤ 0]) e²_{t−j} + Σ ψ_j b²_{t−j}
//! egarch:   ln b_t² = ω + Σ (α_j z_{t−j} + γ_j (|z_{t−j}| − E|z|)) + Σ ψ_j ln b²_{t−j}
//! ```
//!
//! and `z_t` standard normal or skew-normal rescaled to zero mean and unit
//! variance. Orders are written `(q, p)`: `q` ARCH lags, `p` GARCH lags.

mod filter;
mod fit;
mod forecast;
mod transform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::DistSpec;
use crate::error::{Error, Result};
use crate::numeric::special::{norm_cdf, norm_pdf, owens_t, INV_SQRT_2PI};

pub use filter::Trace;
pub use fit::{
    fit, fit_with, grid, select_best, write_league_csv, FitOptions, GridLimit, LeagueRow, Selection,
    MIN_OBS, RECOMMENDED_OBS,
};
pub use forecast::{Forecast, Propagator, RecursionState};
pub use transform::Candidate;

/// Largest lag order handled by the recursions.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Garch,
    Igarch,
    Egarch,
    Gjr,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Garch, Variant::Igarch, Variant::Egarch, Variant::Gjr];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Garch => "garch",
            Variant::Igarch => "igarch",
            Variant::Egarch => "egarch",
            Variant::Gjr => "gjr",
        }
    }

    pub fn has_asymmetry(self) -> bool {
        matches!(self, Variant::Egarch | Variant::Gjr)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParameters(format!("unknown GARCH variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    Normal,
    SkewNormal,
}

impl Innovation {
    pub const ALL: [Innovation; 2] = [Innovation::Normal, Innovation::SkewNormal];

    pub fn name(self) -> &'static str {
        match self {
            Innovation::Normal => "normal",
            Innovation::SkewNormal => "skew_normal",
        }
    }
}

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Innovation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Innovation::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParameters(format!("unknown innovation distribution `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub m: usize,
    pub n: usize,
    /// Unconditional mean μ.
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl ArmaSpec {
    pub fn constant(mean: f64) -> Self {
        ArmaSpec { m: 0, n: 0, mean, ar: vec![], ma: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchSpec {
    pub variant: Variant,
    pub q: usize,
    pub p: usize,
    pub omega: f64,
    /// ARCH coefficients α (sign effect for EGARCH).
    pub arch: Vec<f64>,
    /// Asymmetry coefficients γ (GJR leverage, EGARCH size effect); empty otherwise.
    pub asymmetry: Vec<f64>,
    /// GARCH coefficients ψ.
    pub garch: Vec<f64>,
}

impl GarchSpec {
    pub fn garch(omega: f64, arch: Vec<f64>, garch: Vec<f64>) -> Self {
        GarchSpec { variant: Variant::Garch, q: arch.len(), p: garch.len(), omega, arch, asymmetry: vec![], garch }
    }

    pub fn persistence(&self) -> f64 {
        self.arch.iter().sum::<f64>() + self.garch.iter().sum::<f64>()
    }
}

/// Standardized innovation law: zero mean, unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub dist: Innovation,
    /// Skew-normal shape; zero for the normal.
    pub shape: f64,
}

impl InnovationSpec {
    pub fn normal() -> Self {
        InnovationSpec { dist: Innovation::Normal, shape: 0.0 }
    }

    pub fn skew_normal(shape: f64) -> Self {
        InnovationSpec { dist: Innovation::SkewNormal, shape }
    }

    /// The innovation as a location-scale [`DistSpec`].
    pub fn dist_spec(&self) -> DistSpec {
        match self.dist {
            Innovation::Normal => DistSpec::standard_normal(),
            Innovation::SkewNormal => {
                let (mu, sigma) = skew_normal_moments(self.shape);
                DistSpec::skew_normal(-mu / sigma, 1.0 / sigma, self.shape)
            }
        }
    }

    /// `E|z|`.
    pub fn abs_mean(&self) -> f64 {
        match self.dist {
            Innovation::Normal => (2.0 / std::f64::consts::PI).sqrt(),
            Innovation::SkewNormal => skew_normal_abs_mean(self.shape),
        }
    }

    /// `P(z ≤ 0)`.
    pub fn prob_non_positive(&self) -> f64 {
        match self.dist {
            Innovation::Normal => 0.5,
            Innovation::SkewNormal => self.dist_spec().cdf(0.0),
        }
    }
}

/// Mean and standard deviation of the standard skew-normal with shape `c`.
pub(crate) fn skew_normal_moments(c: f64) -> (f64, f64) {
    let delta = c / (1.0 + c * c).sqrt();
    let mu = delta * (2.0 / std::f64::consts::PI).sqrt();
    (mu, (1.0 - mu * mu).sqrt())
}

/// `E|Z|` for the standardized skew-normal.
///
/// With `X` standard skew-normal (shape `c`, `δ = c/√(1+c²)`, mean `μ`):
/// `E|X − m| = (μ − m) + 2m·F(m) + 4φ(m)Φ(cm) − 4δφ(0)Φ(m√(1+c²))`,
/// evaluated at `m = μ` and divided by the standard deviation.
pub(crate) fn skew_normal_abs_mean(c: f64) -> f64 {
    let (mu, sigma) = skew_normal_moments(c);
    let root = (1.0 + c * c).sqrt();
    let delta = c / root;
    let cdf_mu = norm_cdf(mu) - 2.0 * owens_t(mu, c);
    let e = 2.0 * mu * cdf_mu + 4.0 * norm_pdf(mu) * norm_cdf(c * mu) - 4.0 * delta * INV_SQRT_2PI * norm_cdf(mu * root);
    e / sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arma: ArmaSpec,
    pub garch: GarchSpec,
    pub innovation: InnovationSpec,
}

impl ModelSpec {
    /// Free parameters: mean, AR, MA, variance block and the skew shape.
    pub fn n_params(&self) -> usize {
        let g = &self.garch;
        let variance = match g.variant {
            Variant::Garch => 1 + g.q + g.p,
            Variant::Igarch => g.q + g.p,
            Variant::Gjr | Variant::Egarch => 1 + 2 * g.q + g.p,
        };
        1 + self.arma.m + self.arma.n + variance + usize::from(self.innovation.dist == Innovation::SkewNormal)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        let a = &self.arma;
        let g = &self.garch;
        if a.m > 1 || a.n > 1 || a.ar.len() != a.m || a.ma.len() != a.n {
            return bad(format!("ARMA orders ({}, {}) do not match coefficients", a.m, a.n));
        }
        if a.ar.iter().chain(&a.ma).any(|v| !(v.abs() < 1.0)) || !a.mean.is_finite() {
            return bad("ARMA coefficients must lie in (−1, 1)".into());
        }
        if !(1..=MAX_ORDER).contains(&g.q) || !(1..=MAX_ORDER).contains(&g.p) || g.arch.len() != g.q || g.garch.len() != g.p {
            return bad(format!("GARCH orders ({}, {}) do not match coefficients", g.q, g.p));
        }
        let asym_len = if g.variant.has_asymmetry() { g.q } else { 0 };
        if g.asymmetry.len() != asym_len {
            return bad(format!("{} expects {asym_len} asymmetry coefficients", g.variant));
        }
        let all = g.arch.iter().chain(&g.asymmetry).chain(&g.garch);
        if all.clone().any(|v| !v.is_finite()) || !g.omega.is_finite() || !self.innovation.shape.is_finite() {
            return bad("non-finite coefficient".into());
        }
        let nonneg = g.arch.iter().chain(&g.garch).all(|&v| v >= 0.0);
        let sum = g.persistence();
        match g.variant {
            Variant::Garch if !(g.omega > 0.0 && nonneg && sum < 1.0) => {
                bad(format!("garch needs ω > 0, α, ψ ≥ 0 and Σα + Σψ < 1 (got {sum})"))
            }
            Variant::Igarch if !(g.omega > 0.0 && nonneg && (sum - 1.0).abs() <= 1e-10) => {
                bad(format!("igarch needs ω > 0, α, ψ ≥ 0 and Σα + Σψ = 1 (got {sum})"))
            }
            Variant::Gjr
                if !(g.omega > 0.0 && nonneg && g.arch.iter().zip(&g.asymmetry).all(|(a, c)| a + c >= 0.0)) =>
            {
                bad("gjr needs ω > 0, α, ψ ≥ 0 and α + γ ≥ 0".into())
            }
            Variant::Egarch if !(g.garch.iter().sum::<f64>().abs() < 1.0) => bad("egarch needs |Σψ| < 1".into()),
            _ => Ok(()),
        }
    }
}

/// Presample values: the mean recursion starts from `mean` with zero
/// innovations and the variance recursion from `variance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Presample {
    pub mean: f64,
    pub variance: f64,
}

impl Presample {
    pub fn from_returns(r: &[f64]) -> Self {
        Presample { mean: crate::stats::mean(r), variance: crate::stats::variance(r) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMarginal {
    pub asset_id: String,
    pub model: ModelSpec,
    pub presample: Presample,
    pub loglik: f64,
    pub aic: f64,
    /// `k·ln T − 2·loglik`.
    pub bic: f64,
    pub bic_per_obs: f64,
    pub n_params: usize,
    pub converged: bool,
    pub returns: Vec<f64>,
    /// Conditional means `a_t`.
    pub cond_mean: Vec<f64>,
    /// Conditional standard deviations `b_t`.
    pub cond_sd: Vec<f64>,
    /// Standardized residuals `z_t = (r_t − a_t)/b_t`.
    pub residuals: Vec<f64>,
}

impl FittedMarginal {
    pub fn n_obs(&self) -> usize {
        self.returns.len()
    }

    /// Order label as `(q,p)`.
    pub fn order_label(&self) -> String {
        format!("({},{})", self.model.garch.q, self.model.garch.p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FittedMarginal = serde_json::from_str(s)?;
        m.model.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad;

    #[test]
    fn standardized_skew_normal_has_zero_mean_unit_variance() {
        for c in [-4.0, -0.7, 0.0, 1.3, 6.0] {
            let s = InnovationSpec::skew_normal(c).dist_spec();
            let m = quad::integrate(|z| z * s.pdf(z), -15.0, 15.0, 1e-14, 1e-13);
            let v = quad::integrate(|z| z * z * s.pdf(z), -15.0, 15.0, 1e-14, 1e-13);
            assert!(m.abs() < 1e-10 && (v - 1.0).abs() < 1e-9, "c={c}: {m} {v}");
        }
    }

    #[test]
    fn skew_normal_abs_mean_matches_quadrature() {
        for c in [-3.0, -0.5, 0.0, 0.8, 5.0] {
            let s = InnovationSpec::skew_normal(c);
            let d = s.dist_spec();
            let direct = quad::integrate(|z| z.abs() * d.pdf(z), -15.0, 15.0, 1e-14, 1e-13);
            assert!((s.abs_mean() - direct).abs() < 1e-10, "c={c}");
        }
        assert!((InnovationSpec::normal().abs_mean() - skew_normal_abs_mean(0.0)).abs() < 1e-15);
    }

    #[test]
    fn parameter_counts() {
        let spec = |variant, q, p, dist| ModelSpec {
            arma: ArmaSpec { m: 1, n: 1, mean: 0.0, ar: vec![0.1], ma: vec![0.1] },
            garch: GarchSpec {
                variant,
                q,
                p,
                omega: 0.1,
                arch: vec![0.05; q],
                asymmetry: if variant.has_asymmetry() { vec![0.0; q] } else { vec![] },
                garch: vec![0.1; p],
            },
            innovation: InnovationSpec { dist, shape: 0.0 },
        };
        assert_eq!(spec(Variant::Garch, 1, 1, Innovation::Normal).n_params(), 6);
        assert_eq!(spec(Variant::Igarch, 1, 1, Innovation::Normal).n_params(), 5);
        assert_eq!(spec(Variant::Egarch, 3, 3, Innovation::SkewNormal).n_params(), 14);
    }
}
