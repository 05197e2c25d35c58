//! Probability integral transforms of standardized residuals.

use serde::{Deserialize, Serialize};

use super::check_unit_rows;
use crate::distributions::{select_pit_family, PitSelection};
use crate::error::{Error, Result};
use crate::stats::pseudo_observations_matrix;

/// A `T × N` matrix of values strictly inside (0, 1), with the per-asset
/// distribution used to produce each column when it came from residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservations {
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
    pub sources: Vec<PitSelection>,
}

impl PseudoObservations {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        check_unit_rows(&rows, dim)?;
        Ok(PseudoObservations { rows, sources: Vec::new() })
    }

    /// Column ranks scaled by `1/(T+1)`.
    pub fn from_ranks(data: &[Vec<f64>]) -> Result<Self> {
        Self::new(pseudo_observations_matrix(data))
    }

    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Assets whose chosen distribution fails the K-S or uniformity test at 1%.
    pub fn failing_assets(&self) -> Vec<usize> {
        self.sources.iter().enumerate().filter(|(_, s)| !s.passes).map(|(i, _)| i).collect()
    }
}

/// Maps each asset's residual series through the best-fitting candidate
/// distribution. `residuals[i]` is asset `i`'s series; all must have equal length.
pub fn to_pit(residuals: &[Vec<f64>], bins: usize) -> Result<PseudoObservations> {
    let n = residuals.first().map_or(0, Vec::len);
    if residuals.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameters("residual series differ in length".into()));
    }
    let sources = residuals.iter().map(|z| select_pit_family(z, bins)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = (0..n).map(|t| sources.iter().map(|s| s.u[t]).collect()).collect();
    check_unit_rows(&rows, residuals.len())?;
    Ok(PseudoObservations { rows, sources })
}
