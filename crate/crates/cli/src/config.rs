//! Run configuration: one TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use garch_copula::copulas::CopulaFamily;
use garch_copula::garch::GridLimit;
use garch_copula::ingestion::DEFAULT_MISSING_THRESHOLD;
use garch_copula::optimizer::Objective;
use garch_copula::simulation::{ModelUpdate, DEFAULT_PATHS};
use garch_copula::vine::VineKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, CliError, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "GARCH_COPULA_OUTPUT";
const FALLBACK_OUTPUT: &str = "garch-copula-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceKind {
    Gaussian,
    T,
    Clayton,
    Gumbel,
    Rvine,
    Cvine,
    Dvine,
    #[default]
    Auto,
}

impl DependenceKind {
    pub const ALL: [DependenceKind; 8] = [
        DependenceKind::Gaussian,
        DependenceKind::T,
        DependenceKind::Clayton,
        DependenceKind::Gumbel,
        DependenceKind::Rvine,
        DependenceKind::Cvine,
        DependenceKind::Dvine,
        DependenceKind::Auto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DependenceKind::Gaussian => "gaussian",
            DependenceKind::T => "t",
            DependenceKind::Clayton => "clayton",
            DependenceKind::Gumbel => "gumbel",
            DependenceKind::Rvine => "rvine",
            DependenceKind::Cvine => "cvine",
            DependenceKind::Dvine => "dvine",
            DependenceKind::Auto => "auto",
        }
    }

    pub fn copula_family(self) -> Option<CopulaFamily> {
        match self {
            DependenceKind::Gaussian => Some(CopulaFamily::Gaussian),
            DependenceKind::T => Some(CopulaFamily::T),
            DependenceKind::Clayton => Some(CopulaFamily::Clayton),
            DependenceKind::Gumbel => Some(CopulaFamily::Gumbel),
            _ => None,
        }
    }

    pub fn vine_kind(self) -> Option<VineKind> {
        match self {
            DependenceKind::Rvine => Some(VineKind::RVine),
            DependenceKind::Cvine => Some(VineKind::CVine),
            DependenceKind::Dvine => Some(VineKind::DVine),
            _ => None,
        }
    }
}

impl fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DependenceKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        DependenceKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| CliError::Config(format!("unknown dependence kind `{s}`")))
    }
}

/// Where backtest windows are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacktestEvaluation {
    /// On a simulated scenario set.
    #[default]
    Simulated,
    /// On the last `backtest.horizon` rows of the panel, which are then left out of every fit.
    Holdout,
}

/// How optimization moments are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentsFrom {
    #[default]
    Simulated,
    Historical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Price CSV `date,<asset>...`; relative paths resolve against the config file.
    pub input: PathBuf,
    /// Assets to keep; empty keeps all.
    #[serde(default)]
    pub assets: Vec<String>,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub end: Option<String>,
    #[serde(default = "default_threshold")]
    pub missing_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_MISSING_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub grid_limit: GridLimit,
    /// Perturbed BFGS restarts per candidate.
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { grid_limit: GridLimit::Full, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DependenceConfig {
    pub kind: DependenceKind,
    pub pit_bins: usize,
    pub gof_bootstrap: usize,
}

impl Default for DependenceConfig {
    fn default() -> Self {
        DependenceConfig { kind: DependenceKind::Auto, pit_bins: 20, gof_bootstrap: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub target: Objective,
    pub bound: f64,
    pub risk_free: f64,
    pub moments: MomentsFrom,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { target: Objective::Tangency, bound: 0.01, risk_free: 0.0, moments: MomentsFrom::Simulated }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_paths: usize,
    /// Fixed evaluation horizons; the simulation runs to the longest.
    pub horizons: Vec<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { n_paths: DEFAULT_PATHS, horizons: vec![30, 60, 90] }
    }
}

impl SimulationSection {
    pub fn horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    pub window: usize,
    pub horizon: usize,
    pub update: ModelUpdate,
    pub evaluation: BacktestEvaluation,
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection { window: 30, horizon: 90, update: ModelUpdate::Reuse, evaluation: BacktestEvaluation::Simulated }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for every randomized step; there is no default.
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub dependence: DependenceConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub backtest: BacktestSection,
}

/// Command-line values that replace configuration entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_limit: Option<GridLimit>,
    pub kind: Option<DependenceKind>,
    pub gof_bootstrap: Option<usize>,
    pub target: Option<Objective>,
    pub bound: Option<f64>,
    pub risk_free: Option<f64>,
    pub n_paths: Option<usize>,
    pub horizons: Option<Vec<usize>>,
    pub window: Option<usize>,
    pub backtest_horizon: Option<usize>,
}

impl RunConfig {
    /// Reads a TOML file; relative input and output paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|source| CliError::Toml { path: path.to_path_buf(), source })?;
        if let Some(dir) = path.parent() {
            if cfg.data.input.is_relative() {
                cfg.data.input = dir.join(&cfg.data.input);
            }
            if let Some(out) = cfg.output_dir.as_mut().filter(|o| o.is_relative()) {
                *out = dir.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.input {
            self.data.input = v.clone();
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = Some(v.clone());
        }
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = o.$src.clone() {
                    self.$($dst)+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(grid_limit => fit.grid_limit);
        set!(kind => dependence.kind);
        set!(gof_bootstrap => dependence.gof_bootstrap);
        set!(target => optimize.target);
        set!(bound => optimize.bound);
        set!(risk_free => optimize.risk_free);
        set!(n_paths => simulation.n_paths);
        set!(horizons => simulation.horizons);
        set!(window => backtest.window);
        set!(backtest_horizon => backtest.horizon);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(0.0..1.0).contains(&self.data.missing_threshold) {
            return bad(format!("missing_threshold {} must lie in [0, 1)", self.data.missing_threshold));
        }
        self.date_range()?;
        if !(0.0..=1.0).contains(&self.optimize.bound) {
            return bad(format!("bound {} must lie in [0, 1]", self.optimize.bound));
        }
        if !self.optimize.risk_free.is_finite() {
            return bad("risk_free must be finite".into());
        }
        if self.simulation.n_paths == 0 || self.simulation.horizons.contains(&0) || self.simulation.horizons.is_empty() {
            return bad("simulation needs n_paths ≥ 1 and horizons ≥ 1".into());
        }
        if self.backtest.window == 0 || self.backtest.horizon == 0 {
            return bad("backtest window and horizon must be at least 1".into());
        }
        if self.dependence.pit_bins < 2 || self.dependence.gof_bootstrap == 0 {
            return bad("pit_bins must be ≥ 2 and gof_bootstrap ≥ 1".into());
        }
        Ok(())
    }

    pub fn date_range(&self) -> Result<(Option<NaiveDate>, Option<NaiveDate>)> {
        let parse = |s: &Option<String>| -> Result<Option<NaiveDate>> {
            s.as_deref()
                .map(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|e| CliError::Config(format!("bad date `{d}`: {e}"))))
                .transpose()
        };
        Ok((parse(&self.data.start)?, parse(&self.data.end)?))
    }

    /// Explicit setting, then the environment, then a fixed fallback.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT))
    }

    /// SHA-256 over the settings that shape results (everything except the
    /// output location) and the bytes of the input file.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output_dir = None;
        let input = std::fs::read(&self.data.input).map_err(io(&self.data.input))?;
        canon.data.input = PathBuf::new();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canon).expect("config serializes"));
        h.update(Sha256::digest(&input));
        Ok(hex::encode(h.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 7\n[data]\ninput = \"p.csv\"\n").unwrap();
        assert_eq!(cfg.optimize.bound, 0.01);
        assert_eq!(cfg.simulation.n_paths, 5000);
        assert_eq!(cfg.simulation.horizons, vec![30, 60, 90]);
        assert_eq!(cfg.backtest.window, 30);
        assert_eq!(cfg.fit.grid_limit, GridLimit::Full);
        assert_eq!(cfg.data.missing_threshold, 0.10);
        assert_eq!(cfg.dependence.kind, DependenceKind::Auto);
    }

    #[test]
    fn seed_is_required() {
        assert!(toml::from_str::<RunConfig>("[data]\ninput = \"p.csv\"\n").is_err());
    }

    #[test]
    fn flags_win() {
        let mut cfg: RunConfig =
            toml::from_str("seed = 7\n[data]\ninput = \"p.csv\"\n[dependence]\nkind = \"t\"\n").unwrap();
        cfg.apply(&Overrides { kind: Some(DependenceKind::Dvine), seed: Some(9), ..Default::default() });
        assert_eq!(cfg.dependence.kind, DependenceKind::Dvine);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn kind_names() {
        assert_eq!("d-vine".parse::<DependenceKind>().unwrap(), DependenceKind::Dvine);
        assert_eq!("T".parse::<DependenceKind>().unwrap(), DependenceKind::T);
        assert!("frank".parse::<DependenceKind>().is_err());
    }
}
