//! Rolling rebalance: re-optimize from fresh simulated moments at each
//! window boundary and hold the weights for the window.

use serde::{Deserialize, Serialize};

use super::{
    evaluate_fixed_horizon, simulate_joint_returns, Dependence, MarginalStart, ReturnSource, SimulatedReturns,
    SimulationConfig,
};
use crate::error::{Error, Result};
use crate::optimizer::{covariance_from_simulation, min_variance, tangency, Objective, PerformanceReport};
use crate::rng;

/// What happens to the models at each window boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelUpdate {
    /// Keep the parameters; only the lag state follows realized returns.
    #[default]
    Reuse,
    /// Re-estimate on everything observed so far.
    Refit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub window_days: usize,
    pub total_horizon: usize,
    pub target: Objective,
    pub bound: f64,
    pub risk_free: f64,
    pub update: ModelUpdate,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            window_days: 30,
            total_horizon: 90,
            target: Objective::Tangency,
            bound: 0.01,
            risk_free: 0.0,
            update: ModelUpdate::Reuse,
        }
    }
}

/// Re-estimates marginals and dependence after new returns were observed.
pub trait Refitter: Sync {
    /// `observed` holds the realized rows since the end of the original sample.
    fn refit(&self, observed: &[Vec<f64>], current: &SimulationConfig) -> Result<(Vec<MarginalStart>, Dependence)>;
}

/// Where window performance is measured.
#[derive(Debug, Clone, Copy)]
pub enum Evaluation<'a> {
    /// On one simulated scenario set over the whole horizon, pooled per window.
    Simulated,
    /// On realized rows following the estimation sample.
    Realized(&'a [Vec<f64>]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub index: usize,
    pub start_day: usize,
    pub days: usize,
    /// Shorter than the configured window.
    pub truncated: bool,
    pub weights: Vec<f64>,
    /// Set when optimization failed and the previous weights were kept.
    pub optimization_error: Option<String>,
    pub report: Option<PerformanceReport>,
    pub report_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub assets: Vec<String>,
    pub windows: Vec<WindowReport>,
}

impl BacktestResult {
    pub fn weight_history(&self) -> Vec<Vec<f64>> {
        self.windows.iter().map(|w| w.weights.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn optimize(bt: &BacktestConfig, flat: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = covariance_from_simulation(flat, n)?;
    let w = match bt.target {
        Objective::MinVariance => min_variance(&m, bt.bound)?,
        Objective::Tangency => tangency(&m, bt.bound, bt.risk_free)?,
    };
    Ok(w.weights)
}

/// Splits `total_horizon` into windows of `window_days`; the last one is
/// truncated when the division is not exact. At each boundary the models
/// are updated per `bt.update`, a fresh simulation covering the window gives
/// the moments, the optimizer sets the weights, and the window is
/// evaluated with those weights held fixed. A failed optimization keeps the
/// previous weights (equal weights in the first window) and is recorded.
pub fn rolling_backtest(
    bt: &BacktestConfig,
    sim: &SimulationConfig,
    eval: Evaluation<'_>,
    refitter: Option<&dyn Refitter>,
) -> Result<BacktestResult> {
    sim.validate()?;
    if bt.window_days == 0 || bt.total_horizon == 0 {
        return Err(Error::ConfigError("window and horizon must be at least one day".into()));
    }
    let n = sim.marginals.len();
    if bt.bound * n as f64 > 1.0 + 1e-12 || !(0.0..=1.0).contains(&bt.bound) {
        return Err(Error::InfeasibleConstraints(format!("lower bound {} with {n} assets cannot sum to 1", bt.bound)));
    }
    if let Evaluation::Realized(rows) = eval {
        if rows.len() < bt.total_horizon {
            return Err(Error::ConfigError(format!("{} realized rows for a {}-day horizon", rows.len(), bt.total_horizon)));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ConfigError(format!("realized rows must have {n} assets")));
        }
        if bt.update == ModelUpdate::Refit && refitter.is_none() {
            return Err(Error::ConfigError("refitting needs a refit procedure".into()));
        }
    }

    let scenario: Option<SimulatedReturns> = match eval {
        Evaluation::Simulated => {
            Some(simulate_joint_returns(&SimulationConfig { horizon: bt.total_horizon, keep_innovations: false, ..sim.clone() })?)
        }
        Evaluation::Realized(_) => None,
    };

    let mut current = sim.clone();
    current.keep_innovations = false;
    let mut windows = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut start = 0;
    let mut index = 0;
    while start < bt.total_horizon {
        let days = bt.window_days.min(bt.total_horizon - start);
        let end = start + days;
        let seed = rng::mix(sim.master_seed, index as u64 + 1);

        let flat = match eval {
            // No new information arrives along a simulated scenario, so the
            // models stay as they are and the fresh draw covers days start..end.
            Evaluation::Simulated => {
                let fresh = simulate_joint_returns(&SimulationConfig { horizon: end, master_seed: seed, ..current.clone() })?;
                fresh.window_flat(start..end)
            }
            Evaluation::Realized(rows) => {
                if index > 0 {
                    match bt.update {
                        ModelUpdate::Reuse => {
                            let seen = &rows[start - bt.window_days..start];
                            for (i, m) in current.marginals.iter_mut().enumerate() {
                                let col: Vec<f64> = seen.iter().map(|r| r[i]).collect();
                                m.advance(&col)?;
                            }
                        }
                        ModelUpdate::Refit => {
                            let r = refitter.expect("checked above");
                            let (marginals, dependence) = r.refit(&rows[..start], &current)?;
                            current.marginals = marginals;
                            current.dependence = dependence;
                            current.validate()?;
                        }
                    }
                }
                let fresh = simulate_joint_returns(&SimulationConfig { horizon: days, master_seed: seed, ..current.clone() })?;
                fresh.data
            }
        };

        let (weights, optimization_error) = match optimize(bt, &flat, n) {
            Ok(w) => (w, None),
            Err(e) => {
                let fallback = prev.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
                (fallback, Some(e.to_string()))
            }
        };
        let evaluated = match (&scenario, eval) {
            (Some(s), _) => {
                let slice = SimulatedReturns {
                    n_paths: s.n_paths,
                    horizon: days,
                    assets: s.assets.clone(),
                    seed: s.seed,
                    data: s.window_flat(start..end),
                    innovations: Vec::new(),
                };
                evaluate_fixed_horizon(&weights, ReturnSource::Simulated(&slice), bt.risk_free)
            }
            (None, Evaluation::Realized(rows)) => {
                evaluate_fixed_horizon(&weights, ReturnSource::Realized(&rows[start..end]), bt.risk_free)
            }
            (None, Evaluation::Simulated) => unreachable!("scenario exists for simulated evaluation"),
        };
        let (report, report_error) = match evaluated {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        windows.push(WindowReport {
            index,
            start_day: start,
            days,
            truncated: days < bt.window_days,
            weights: weights.clone(),
            optimization_error,
            report,
            report_error,
        });
        prev = Some(weights);
        start = end;
        index += 1;
    }
    Ok(BacktestResult { assets: sim.asset_ids(), windows })
}
