//! Multivariate copulas (gaussian, Student t, Clayton, Gumbel) over uniform
//! pseudo-observations: evaluation, fitting, sampling and a bootstrap
//! goodness-of-fit test.

mod corr;
mod eval;
mod fit;
mod gof;
mod mvn;
mod pit;
mod sample;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corr::{correlation_from_tau, nearest_correlation};
pub use eval::{copula_cdf, copula_density, copula_ln_density, copula_loglik};
pub use fit::{fit_copula, fit_copula_rows, MIN_COPULA_OBS, T_NU_GRID};
pub use gof::{empirical_copula, gof_test, GofResult, DEFAULT_BOOTSTRAP};
pub use pit::{to_pit, PseudoObservations};
pub use sample::{sample_copula, CopulaSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Gaussian,
    T,
    Clayton,
    Gumbel,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 4] = [CopulaFamily::Gaussian, CopulaFamily::T, CopulaFamily::Clayton, CopulaFamily::Gumbel];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::T => "t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
        }
    }

    pub fn is_elliptical(self) -> bool {
        matches!(self, CopulaFamily::Gaussian | CopulaFamily::T)
    }

    /// Free parameters in dimension `dim`.
    pub fn n_params(self, dim: usize) -> usize {
        match self {
            CopulaFamily::Gaussian => dim * (dim - 1) / 2,
            CopulaFamily::T => dim * (dim - 1) / 2 + 1,
            CopulaFamily::Clayton | CopulaFamily::Gumbel => 1,
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(CopulaFamily::Gaussian),
            "t" | "student_t" => Ok(CopulaFamily::T),
            "clayton" => Ok(CopulaFamily::Clayton),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            other => Err(Error::ConfigError(format!("unknown copula family '{other}'"))),
        }
    }
}

/// Largest archimedean parameter accepted by the fitters.
pub const MAX_ARCHIMEDEAN_DELTA: f64 = 50.0;

/// A copula over `dim` uniform margins.
///
/// `params` holds the strict upper triangle of the correlation matrix (row
/// major) for the elliptical families, or the single `δ` for the archimedean
/// ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub family: CopulaFamily,
    pub dim: usize,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(deserialize_with = "crate::serde_nan::deserialize")]
    pub loglik: f64,
    #[serde(deserialize_with = "crate::serde_nan::deserialize")]
    pub aic: f64,
    #[serde(deserialize_with = "crate::serde_nan::deserialize")]
    pub bic: f64,
    pub gof_p: Option<f64>,
    /// Set when the correlation start had to be projected to the nearest PD matrix.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub projected: bool,
}

impl CopulaModel {
    fn unfitted(family: CopulaFamily, dim: usize, params: Vec<f64>, nu: Option<f64>) -> Result<Self> {
        let m = CopulaModel {
            family,
            dim,
            params,
            nu,
            loglik: f64::NAN,
            aic: f64::NAN,
            bic: f64::NAN,
            gof_p: None,
            projected: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(corr: &DMatrix<f64>) -> Result<Self> {
        Self::unfitted(CopulaFamily::Gaussian, corr.nrows(), upper_triangle(corr), None)
    }

    pub fn t(corr: &DMatrix<f64>, nu: f64) -> Result<Self> {
        Self::unfitted(CopulaFamily::T, corr.nrows(), upper_triangle(corr), Some(nu))
    }

    pub fn clayton(dim: usize, delta: f64) -> Result<Self> {
        Self::unfitted(CopulaFamily::Clayton, dim, vec![delta], None)
    }

    pub fn gumbel(dim: usize, delta: f64) -> Result<Self> {
        Self::unfitted(CopulaFamily::Gumbel, dim, vec![delta], None)
    }

    /// Independence copula, expressed as a gaussian with identity correlation.
    pub fn independence(dim: usize) -> Result<Self> {
        Self::gaussian(&DMatrix::identity(dim, dim))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        if self.dim < 2 {
            return bad(format!("copula dimension must be at least 2, got {}", self.dim));
        }
        match self.family {
            CopulaFamily::Gaussian | CopulaFamily::T => {
                let want = self.dim * (self.dim - 1) / 2;
                if self.params.len() != want {
                    return bad(format!("expected {want} correlations, got {}", self.params.len()));
                }
                if self.params.iter().any(|r| !(r.abs() < 1.0)) {
                    return bad("correlations must lie in (-1, 1)".into());
                }
                if self.correlation().cholesky().is_none() {
                    return bad("correlation matrix is not positive definite".into());
                }
                match (self.family, self.nu) {
                    (CopulaFamily::T, Some(nu)) if nu > 2.0 && nu.is_finite() => {}
                    (CopulaFamily::T, nu) => return bad(format!("t copula needs nu > 2, got {nu:?}")),
                    (_, Some(_)) => return bad("nu is only defined for the t copula".into()),
                    _ => {}
                }
            }
            CopulaFamily::Clayton => {
                if self.params.len() != 1 || !(self.params[0] > 0.0 && self.params[0].is_finite()) {
                    return bad(format!("clayton delta must be in (0, inf), got {:?}", self.params));
                }
            }
            CopulaFamily::Gumbel => {
                if self.params.len() != 1 || !(self.params[0] >= 1.0 && self.params[0].is_finite()) {
                    return bad(format!("gumbel delta must be in [1, inf), got {:?}", self.params));
                }
            }
        }
        Ok(())
    }

    /// Full correlation matrix (identity for archimedean families).
    pub fn correlation(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.dim, self.dim);
        if self.family.is_elliptical() {
            let mut k = 0;
            for i in 0..self.dim {
                for j in (i + 1)..self.dim {
                    m[(i, j)] = self.params[k];
                    m[(j, i)] = self.params[k];
                    k += 1;
                }
            }
        }
        m
    }

    /// Archimedean parameter, if any.
    pub fn delta(&self) -> Option<f64> {
        (!self.family.is_elliptical()).then(|| self.params[0])
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params(self.dim)
    }

    /// Closed-form Kendall's tau between margins `i` and `j`.
    pub fn kendall_tau(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        match self.family {
            CopulaFamily::Gaussian | CopulaFamily::T => {
                2.0 / std::f64::consts::PI * self.correlation()[(i, j)].asin()
            }
            CopulaFamily::Clayton => self.params[0] / (self.params[0] + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / self.params[0],
        }
    }

    pub(crate) fn set_fit_metrics(&mut self, loglik: f64, n_obs: usize) {
        let k = self.n_params() as f64;
        self.loglik = loglik;
        self.aic = 2.0 * k - 2.0 * loglik;
        self.bic = k * (n_obs as f64).ln() - 2.0 * loglik;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: CopulaModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

pub(crate) fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * (d.saturating_sub(1)) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Checks that every row has `dim` entries strictly inside (0, 1).
pub(crate) fn check_unit_rows(rows: &[Vec<f64>], dim: usize) -> Result<()> {
    for (t, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::DomainError(format!("row {t} has {} columns, expected {dim}", r.len())));
        }
        if let Some(v) = r.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::DomainError(format!("row {t}: value {v} outside the open unit interval")));
        }
    }
    Ok(())
}

/// Writes the family comparison table (`family,gof_p,aic,bic`).
pub fn write_comparison_csv<W: Write>(w: W, models: &[CopulaModel]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["family", "gof_p", "aic", "bic"])?;
    for m in models {
        wr.write_record([
            m.family.name().to_string(),
            m.gof_p.map_or_else(String::new, |p| p.to_string()),
            m.aic.to_string(),
            m.bic.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in CopulaFamily::ALL {
            assert_eq!(f.name().parse::<CopulaFamily>().unwrap(), f);
        }
        assert!("frank".parse::<CopulaFamily>().is_err());
    }

    #[test]
    fn parameter_domains() {
        assert!(CopulaModel::clayton(2, 0.0).is_err());
        assert!(CopulaModel::gumbel(3, 0.99).is_err());
        assert!(CopulaModel::gumbel(3, 1.0).is_ok());
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(CopulaModel::t(&r, 2.0).is_err());
        assert!(CopulaModel::t(&r, 4.0).is_ok());
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(CopulaModel::gaussian(&bad).is_err());
    }

    #[test]
    fn json_shape() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let mut m = CopulaModel::t(&r, 5.0).unwrap();
        m.set_fit_metrics(10.0, 100);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for key in ["family", "dim", "params", "nu", "loglik", "aic", "bic", "gof_p"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["family"], "t");
        let back = CopulaModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
