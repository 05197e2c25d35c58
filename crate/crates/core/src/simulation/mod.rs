//! Forward Monte Carlo of joint returns, fixed-horizon evaluation and
//! rolling-rebalance backtests.

mod backtest;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use backtest::{rolling_backtest, BacktestConfig, BacktestResult, Evaluation, ModelUpdate, Refitter, WindowReport};

use crate::copulas::{CopulaModel, CopulaSampler};
use crate::error::{Error, Result};
use crate::garch::{FittedMarginal, ModelSpec, Presample, Propagator, RecursionState};
use crate::optimizer::{performance_report, PerformanceReport};
use crate::rng;
use crate::vine::{VineModel, VineSampler};

/// Path count used when none is configured.
pub const DEFAULT_PATHS: usize = 5000;

/// Cross-sectional dependence between the innovations of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    Copula(CopulaModel),
    Vine(VineModel),
}

impl Dependence {
    pub fn dim(&self) -> usize {
        match self {
            Dependence::Copula(m) => m.dim,
            Dependence::Vine(m) => m.dim,
        }
    }

    /// Family or vine kind.
    pub fn name(&self) -> &'static str {
        match self {
            Dependence::Copula(m) => m.family.name(),
            Dependence::Vine(m) => m.kind.name(),
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            Dependence::Copula(m) => m.loglik,
            Dependence::Vine(m) => m.loglik,
        }
    }

    pub fn aic(&self) -> f64 {
        match self {
            Dependence::Copula(m) => m.aic,
            Dependence::Vine(m) => m.aic,
        }
    }

    pub fn bic(&self) -> f64 {
        match self {
            Dependence::Copula(m) => m.bic,
            Dependence::Vine(m) => m.bic,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Dependence::Copula(m) => m.n_params(),
            Dependence::Vine(m) => m.n_params(),
        }
    }

    pub fn gof_p(&self) -> Option<f64> {
        match self {
            Dependence::Copula(m) => m.gof_p,
            Dependence::Vine(m) => m.gof_p,
        }
    }

    pub fn sampler(&self) -> Result<DependenceSampler> {
        Ok(match self {
            Dependence::Copula(m) => DependenceSampler::Copula(CopulaSampler::new(m)?),
            Dependence::Vine(m) => DependenceSampler::Vine(VineSampler::new(m)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Dependence = serde_json::from_str(s)?;
        match &d {
            Dependence::Copula(m) => m.validate()?,
            Dependence::Vine(m) => m.validate()?,
        }
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub enum DependenceSampler {
    Copula(CopulaSampler),
    Vine(VineSampler),
}

impl DependenceSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            DependenceSampler::Copula(s) => s.draw(rng, out),
            DependenceSampler::Vine(s) => s.draw(rng, out),
        }
    }
}

/// A marginal model together with the lag state its paths start from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalStart {
    pub asset_id: String,
    pub model: ModelSpec,
    pub state: RecursionState,
}

impl MarginalStart {
    /// Starts after the last fitted observation.
    pub fn from_fitted(m: &FittedMarginal) -> Self {
        MarginalStart { asset_id: m.asset_id.clone(), model: m.model.clone(), state: m.terminal_state() }
    }

    /// Starts at the unconditional mean and variance.
    pub fn stationary(asset_id: impl Into<String>, model: ModelSpec) -> Self {
        let pre = Presample { mean: model.arma.mean, variance: model.stationary_variance() };
        MarginalStart { asset_id: asset_id.into(), state: RecursionState::presample(&pre), model }
    }

    /// Moves the state forward through observed returns.
    pub fn advance(&mut self, returns: &[f64]) -> Result<()> {
        let p = Propagator::new(&self.model)?;
        for &r in returns {
            let (a, h) = p.moments(&self.state);
            self.state.push(r, r - a, h);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub horizon: usize,
    pub dependence: Dependence,
    pub marginals: Vec<MarginalStart>,
    pub master_seed: u64,
    /// Also return the standardized innovations behind each return.
    pub keep_innovations: bool,
}

impl SimulationConfig {
    pub fn new(dependence: Dependence, marginals: Vec<MarginalStart>, horizon: usize, master_seed: u64) -> Self {
        SimulationConfig { n_paths: DEFAULT_PATHS, horizon, dependence, marginals, master_seed, keep_innovations: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.horizon == 0 {
            return Err(Error::ConfigError("n_paths and horizon must be at least 1".into()));
        }
        if self.marginals.len() != self.dependence.dim() {
            return Err(Error::ConfigError(format!(
                "{} marginal models for a {}-dimensional dependence model",
                self.marginals.len(),
                self.dependence.dim()
            )));
        }
        Ok(())
    }

    pub fn asset_ids(&self) -> Vec<String> {
        self.marginals.iter().map(|m| m.asset_id.clone()).collect()
    }
}

/// Simulated returns stored path-major: `data[(path·horizon + day)·n_assets + asset]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedReturns {
    pub n_paths: usize,
    pub horizon: usize,
    pub assets: Vec<String>,
    pub seed: u64,
    pub data: Vec<f64>,
    /// Same layout as `data`; empty unless requested.
    pub innovations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationSidecar {
    pub n_paths: usize,
    pub horizon: usize,
    pub assets: Vec<String>,
    pub seed: u64,
    pub layout: String,
    pub dtype: String,
}

const LAYOUT: &str = "path,day,asset";
const DTYPE: &str = "f64le";

impl SimulatedReturns {
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn get(&self, path: usize, day: usize, asset: usize) -> f64 {
        self.data[(path * self.horizon + day) * self.n_assets() + asset]
    }

    /// The return vector of one path and day.
    pub fn vector(&self, path: usize, day: usize) -> &[f64] {
        let n = self.n_assets();
        let at = (path * self.horizon + day) * n;
        &self.data[at..at + n]
    }

    /// Every return vector whose day lies in `days`, path by path.
    pub fn window(&self, days: std::ops::Range<usize>) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_paths).flat_map(move |p| days.clone().map(move |d| self.vector(p, d)))
    }

    /// Window vectors flattened row-major.
    pub fn window_flat(&self, days: std::ops::Range<usize>) -> Vec<f64> {
        self.window(days).flat_map(|v| v.iter().copied()).collect()
    }

    /// One asset's returns pooled over all paths and days.
    pub fn pooled(&self, asset: usize) -> Vec<f64> {
        self.data.iter().skip(asset).step_by(self.n_assets()).copied().collect()
    }

    pub fn sidecar(&self) -> SimulationSidecar {
        SimulationSidecar {
            n_paths: self.n_paths,
            horizon: self.horizon,
            assets: self.assets.clone(),
            seed: self.seed,
            layout: LAYOUT.into(),
            dtype: DTYPE.into(),
        }
    }

    /// Returns as raw little-endian `f64`s in storage order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Rebuilds from a sidecar and the bytes written by [`Self::to_bytes`].
    pub fn from_bytes(meta: SimulationSidecar, bytes: &[u8]) -> Result<Self> {
        if meta.layout != LAYOUT || meta.dtype != DTYPE {
            return Err(Error::ConfigError(format!("unsupported simulation layout {}/{}", meta.layout, meta.dtype)));
        }
        let expect = meta.n_paths * meta.horizon * meta.assets.len() * 8;
        if bytes.len() != expect {
            return Err(Error::ConfigError(format!("{} bytes of simulated returns, sidecar implies {expect}", bytes.len())));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(SimulatedReturns {
            n_paths: meta.n_paths,
            horizon: meta.horizon,
            assets: meta.assets,
            seed: meta.seed,
            data,
            innovations: Vec::new(),
        })
    }

    /// Writes the returns to `path` and the sidecar to `path` + `.json`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let meta: SimulationSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(meta, &bytes)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Simulates `n_paths × horizon` joint return vectors. Each day draws `U`
/// from the dependence model, maps it through each margin's innovation
/// quantile and advances that margin's ARMA-GARCH recursion, so conditional
/// moments evolve along the path. Path `p` uses substream `p` of the seed.
pub fn simulate_joint_returns(cfg: &SimulationConfig) -> Result<SimulatedReturns> {
    cfg.validate()?;
    let sampler = cfg.dependence.sampler()?;
    let props = cfg.marginals.iter().map(|m| Propagator::new(&m.model)).collect::<Result<Vec<_>>>()?;
    let n = cfg.marginals.len();
    let stride = cfg.horizon * n;
    let mut data = vec![0.0; cfg.n_paths * stride];
    let mut innovations = if cfg.keep_innovations { vec![0.0; data.len()] } else { Vec::new() };
    let run = |p: usize, out: &mut [f64], z_out: Option<&mut [f64]>| -> Result<()> {
        let mut r = rng::substream(cfg.master_seed, p as u64);
        let mut states: Vec<RecursionState> = cfg.marginals.iter().map(|m| m.state).collect();
        let mut u = vec![0.0; n];
        let mut z_out = z_out;
        for day in 0..cfg.horizon {
            sampler.draw(&mut r, &mut u);
            for i in 0..n {
                let z = props[i].innovation_quantile(u[i])?;
                out[day * n + i] = props[i].step(&mut states[i], z);
                if let Some(zs) = z_out.as_deref_mut() {
                    zs[day * n + i] = z;
                }
            }
        }
        Ok(())
    };
    if cfg.keep_innovations {
        data.par_chunks_mut(stride)
            .zip(innovations.par_chunks_mut(stride))
            .enumerate()
            .try_for_each(|(p, (out, zs))| run(p, out, Some(zs)))?;
    } else {
        data.par_chunks_mut(stride).enumerate().try_for_each(|(p, out)| run(p, out, None))?;
    }
    Ok(SimulatedReturns {
        n_paths: cfg.n_paths,
        horizon: cfg.horizon,
        assets: cfg.asset_ids(),
        seed: cfg.master_seed,
        data,
        innovations,
    })
}

/// Returns a portfolio is evaluated on.
#[derive(Debug, Clone, Copy)]
pub enum ReturnSource<'a> {
    /// Pooled over every path and day.
    Simulated(&'a SimulatedReturns),
    /// One row per day.
    Realized(&'a [Vec<f64>]),
}

/// Portfolio returns `Σ w_i r_{i,t}` with weights held fixed, for every
/// path-day or realized day.
pub fn portfolio_series(weights: &[f64], returns: ReturnSource<'_>) -> Result<Vec<f64>> {
    let n = weights.len();
    let dot = |r: &[f64]| r.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
    match returns {
        ReturnSource::Simulated(s) => {
            if s.n_assets() != n {
                return Err(Error::ConfigError(format!("{n} weights for {} simulated assets", s.n_assets())));
            }
            Ok(s.data.chunks_exact(n).map(dot).collect())
        }
        ReturnSource::Realized(rows) => {
            if let Some(r) = rows.iter().find(|r| r.len() != n) {
                return Err(Error::ConfigError(format!("{n} weights for a {}-asset return row", r.len())));
            }
            Ok(rows.iter().map(|r| dot(r)).collect())
        }
    }
}

/// Statistics of the buy-and-hold portfolio series.
pub fn evaluate_fixed_horizon(weights: &[f64], returns: ReturnSource<'_>, risk_free: f64) -> Result<PerformanceReport> {
    performance_report(&portfolio_series(weights, returns)?, risk_free)
}
