//! Pipeline stages. Each stage reuses its artifacts when they were written
//! under the current config hash and recomputes (and rewrites) them otherwise.

use std::collections::BTreeMap;

use garch_copula::copulas::{fit_copula_rows, gof_test, to_pit, write_comparison_csv, CopulaFamily};
use garch_copula::distributions::PitSelection;
use garch_copula::garch::{fit_with, select_best, write_league_csv, Candidate, FitOptions, FittedMarginal};
use garch_copula::ingestion::{prepare_panel, read_price_panel, write_price_panel, ExclusionEntry, PricePanel, PriceSeries};
use garch_copula::optimizer::{
    covariance_from_simulation, min_variance, performance_report, portfolio_returns, tangency, MomentEstimates,
    Objective, PerformanceReport, PortfolioWeights,
};
use garch_copula::rng;
use garch_copula::simulation::{
    evaluate_fixed_horizon, rolling_backtest, simulate_joint_returns, BacktestConfig, BacktestResult, Dependence,
    Evaluation, MarginalStart, ModelUpdate, Refitter, ReturnSource, SimulatedReturns, SimulationConfig,
    SimulationSidecar,
};
use garch_copula::stats::{summary_stats, SummaryStats};
use garch_copula::vine::{refit_vine, select_vine, vine_gof, write_vine_comparison_csv, VineKind, DEFAULT_PAIR_FAMILIES};
use garch_copula::Error;
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::config::{BacktestEvaluation, DependenceKind, MomentsFrom, RunConfig};
use crate::error::{CliError, Result};

const TAG_FIT: u64 = 1;
const TAG_GOF: u64 = 2;
const TAG_SIM: u64 = 3;
const TAG_BACKTEST: u64 = 4;
const TAG_REFIT: u64 = 5;

pub const SIMULATION_FILE: &str = "simulation/paths.bin";

#[derive(Debug, Clone)]
pub struct Ingested {
    pub assets: Vec<String>,
    pub dates: Vec<String>,
    /// Rows used for estimation.
    pub fit_rows: Vec<Vec<f64>>,
    /// Rows held back for backtest evaluation (empty unless configured).
    pub holdout: Vec<Vec<f64>>,
    pub exclusions: Vec<ExclusionEntry>,
    pub summaries: Vec<AssetSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub asset_id: String,
    pub n_obs: usize,
    pub stats: Option<SummaryStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub input: String,
    pub first_date: String,
    pub last_date: String,
    pub n_returns: usize,
    pub fit_rows: usize,
    pub holdout_rows: usize,
    pub retained: Vec<String>,
    pub exclusions: Vec<ExclusionEntry>,
    pub summaries: Vec<AssetSummary>,
}

/// One line of the per-asset model table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub asset_id: String,
    pub garch_model: String,
    pub garch_order: String,
    pub arma_model: String,
    pub cond_distr: String,
    pub loglik: f64,
    pub bic: f64,
    pub bic_per_obs: f64,
    pub converged: bool,
}

impl MarginalRow {
    pub fn of(m: &FittedMarginal) -> Self {
        MarginalRow {
            asset_id: m.asset_id.clone(),
            garch_model: m.model.garch.variant.name().to_string(),
            garch_order: m.order_label(),
            arma_model: format!("({},{})", m.model.arma.m, m.model.arma.n),
            cond_distr: m.model.innovation.dist.name().to_string(),
            loglik: m.loglik,
            bic: m.bic,
            bic_per_obs: m.bic_per_obs,
            converged: m.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub fitted: Vec<String>,
    pub failed: BTreeMap<String, String>,
    pub grid_size: usize,
    pub table: Vec<MarginalRow>,
}

/// One fitted dependence candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub class: String,
    pub loglik: Option<f64>,
    pub n_params: Option<usize>,
    pub gof_p: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub selected: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependenceArtifact {
    pub requested: DependenceKind,
    pub selected: Dependence,
    pub comparison: Vec<ComparisonRow>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: usize,
    pub report: Option<PerformanceReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeArtifact {
    pub assets: Vec<String>,
    pub moments: MomentsFrom,
    pub ridge: bool,
    pub portfolio: PortfolioWeights,
    pub in_sample: Option<PerformanceReport>,
    pub horizons: Vec<HorizonReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestArtifact {
    pub window: usize,
    pub horizon: usize,
    pub evaluation: BacktestEvaluation,
    pub update: ModelUpdate,
    pub target: Objective,
    pub result: BacktestResult,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub art: Artifacts,
    /// Messages shown to the user (fallbacks, skipped candidates, …).
    pub notices: Vec<String>,
    /// Requested artifacts that could not be produced.
    pub incomplete: Vec<String>,
    ingested: Option<Ingested>,
    fits: Option<Vec<FittedMarginal>>,
    dependence: Option<DependenceArtifact>,
    simulation: Option<SimulatedReturns>,
    optimized: Option<OptimizeArtifact>,
    backtest: Option<BacktestArtifact>,
}

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

fn candidate_of(m: &FittedMarginal) -> Candidate {
    let s = &m.model;
    Candidate {
        m: s.arma.m,
        n: s.arma.n,
        variant: s.garch.variant,
        q: s.garch.q,
        p: s.garch.p,
        dist: s.innovation.dist,
    }
}

fn fit_options(cfg: &RunConfig, asset: usize, tag: u64) -> FitOptions {
    FitOptions { restarts: cfg.fit.restarts, seed: rng::mix(rng::mix(cfg.seed, tag), asset as u64), ..Default::default() }
}

/// Selects columns and dates from the raw panel.
fn restrict(raw: PricePanel, cfg: &RunConfig) -> Result<PricePanel> {
    let (start, end) = cfg.date_range()?;
    let keep: Vec<usize> = (0..raw.dates.len())
        .filter(|&t| start.is_none_or(|s| raw.dates[t] >= s) && end.is_none_or(|e| raw.dates[t] <= e))
        .collect();
    let wanted = &cfg.data.assets;
    if let Some(missing) = wanted.iter().find(|a| !raw.assets.iter().any(|s| &s.asset_id == *a)) {
        return Err(CliError::Config(format!("asset `{missing}` is not in the input panel")));
    }
    let dates: Vec<_> = keep.iter().map(|&t| raw.dates[t]).collect();
    let assets = raw
        .assets
        .into_iter()
        .filter(|s| wanted.is_empty() || wanted.contains(&s.asset_id))
        .map(|s| PriceSeries::new(s.asset_id, dates.clone(), keep.iter().map(|&t| s.prices[t]).collect()))
        .collect::<garch_copula::Result<Vec<_>>>()?;
    Ok(PricePanel { dates, assets })
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash()?;
        let art = Artifacts::open(&cfg.output_dir(), &hash, cfg.seed)?;
        Ok(Pipeline {
            cfg,
            art,
            notices: Vec::new(),
            incomplete: Vec::new(),
            ingested: None,
            fits: None,
            dependence: None,
            simulation: None,
            optimized: None,
            backtest: None,
        })
    }

    fn notice(&mut self, msg: String) {
        eprintln!("notice: {msg}");
        self.notices.push(msg);
    }

    /// Reads, filters, repairs and differences the input panel; always recomputed.
    pub fn ingest(&mut self) -> Result<&Ingested> {
        if self.ingested.is_none() {
            let raw = restrict(read_price_panel(&self.cfg.data.input)?, &self.cfg)?;
            let prepared = prepare_panel(&raw, self.cfg.data.missing_threshold)?;
            for e in prepared.exclusions.iter().filter(|e| e.excluded) {
                self.notice(format!("excluded `{}`: {:.1}% of prices missing", e.asset_id, 100.0 * e.missing_fraction));
            }
            let returns = &prepared.returns;
            let rows = returns.rows();
            let holdout_rows = match self.cfg.backtest.evaluation {
                BacktestEvaluation::Holdout => self.cfg.backtest.horizon,
                BacktestEvaluation::Simulated => 0,
            };
            if holdout_rows >= rows.len() {
                return Err(Error::InsufficientData { needed: holdout_rows + 1, got: rows.len() }.into());
            }
            let split = rows.len() - holdout_rows;
            let fit_rows = rows[..split].to_vec();
            let holdout = rows[split..].to_vec();
            let summaries = returns
                .assets
                .iter()
                .enumerate()
                .map(|(i, a)| AssetSummary {
                    asset_id: a.asset_id.clone(),
                    n_obs: split,
                    stats: summary_stats(&column(&fit_rows, i)).ok(),
                })
                .collect();
            let ing = Ingested {
                assets: returns.asset_ids(),
                dates: returns.dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect(),
                fit_rows,
                holdout,
                exclusions: prepared.exclusions.clone(),
                summaries,
            };
            let report = IngestReport {
                input: self.cfg.data.input.display().to_string(),
                first_date: ing.dates.first().cloned().unwrap_or_default(),
                last_date: ing.dates.last().cloned().unwrap_or_default(),
                n_returns: rows.len(),
                fit_rows: split,
                holdout_rows,
                retained: ing.assets.clone(),
                exclusions: ing.exclusions.clone(),
                summaries: ing.summaries.clone(),
            };
            self.art.write_csv("ingest/prices_repaired.csv", |w| write_price_panel(w, &prepared.prices))?;
            let (ids, dates) = (ing.assets.clone(), ing.dates.clone());
            self.art.write_csv("ingest/returns.csv", |w| {
                let mut out = csv_writer(w);
                let mut header = vec!["date".to_string()];
                header.extend(ids);
                out.write_record(&header)?;
                for (d, r) in dates.iter().zip(&rows) {
                    let mut rec = vec![d.clone()];
                    rec.extend(r.iter().map(|v| v.to_string()));
                    out.write_record(&rec)?;
                }
                out.flush()?;
                Ok(())
            })?;
            self.art.write_json("ingest/report.json", &report)?;
            self.ingested = Some(ing);
        }
        Ok(self.ingested.as_ref().expect("set above"))
    }

    /// Selects the ARMA-GARCH model of every asset by BIC over the grid.
    pub fn fit(&mut self) -> Result<&[FittedMarginal]> {
        if self.fits.is_none() {
            let ing = self.ingest()?.clone();
            let cached = self.art.load_json::<FitSummary>("fit/summary.json").and_then(|s| {
                s.fitted
                    .iter()
                    .map(|a| self.art.load_json::<FittedMarginal>(&format!("fit/{a}.json")))
                    .collect::<Option<Vec<_>>>()
                    .map(|f| (s, f))
            });
            let fits = match cached {
                Some((summary, fits)) => {
                    for (a, e) in &summary.failed {
                        self.incomplete.push(format!("fit/{a}.json ({e})"));
                    }
                    fits
                }
                None => self.run_fits(&ing)?,
            };
            if fits.len() < 2 {
                return Err(Error::InsufficientAssets { needed: 2, found: fits.len() }.into());
            }
            self.fits = Some(fits);
        }
        Ok(self.fits.as_deref().expect("set above"))
    }

    fn run_fits(&mut self, ing: &Ingested) -> Result<Vec<FittedMarginal>> {
        let limit = self.cfg.fit.grid_limit;
        let grid_size = garch_copula::garch::grid(limit).len();
        let mut fits = Vec::new();
        let mut failed = BTreeMap::new();
        for (i, asset) in ing.assets.iter().enumerate() {
            let r = column(&ing.fit_rows, i);
            match select_best(asset, &r, limit, &fit_options(&self.cfg, i, TAG_FIT)) {
                Ok(sel) => {
                    self.art.write_csv(&format!("fit/{asset}_league.csv"), |w| write_league_csv(w, &sel.league))?;
                    self.art.write_json(&format!("fit/{asset}.json"), &sel.best)?;
                    fits.push(sel.best);
                }
                Err(e) => {
                    self.notice(format!("no model could be fitted for `{asset}`: {e}"));
                    self.incomplete.push(format!("fit/{asset}.json ({e})"));
                    failed.insert(asset.clone(), e.to_string());
                }
            }
        }
        let table: Vec<MarginalRow> = fits.iter().map(MarginalRow::of).collect();
        let rows = table.clone();
        self.art.write_csv("fit/marginals.csv", |w| {
            let mut out = csv_writer(w);
            out.write_record(["asset_id", "garch_model", "garch_order", "arma_model", "cond_distr", "loglik", "bic", "bic_per_obs"])?;
            for r in &rows {
                out.write_record([
                    r.asset_id.clone(),
                    r.garch_model.clone(),
                    r.garch_order.clone(),
                    r.arma_model.clone(),
                    r.cond_distr.clone(),
                    r.loglik.to_string(),
                    r.bic.to_string(),
                    r.bic_per_obs.to_string(),
                ])?;
            }
            out.flush()?;
            Ok(())
        })?;
        let summary = FitSummary { fitted: fits.iter().map(|f| f.asset_id.clone()).collect(), failed, grid_size, table };
        self.art.write_json("fit/summary.json", &summary)?;
        Ok(fits)
    }

    /// Fits the configured dependence model (or every candidate for `auto`)
    /// to the PIT of the standardized residuals.
    pub fn dependence(&mut self) -> Result<&DependenceArtifact> {
        if self.dependence.is_none() {
            self.fit()?;
            let cached = self.art.load_json::<DependenceArtifact>("dependence/model.json");
            let dep = match cached {
                Some(d) => d,
                None => self.run_dependence()?,
            };
            self.dependence = Some(dep);
        }
        Ok(self.dependence.as_ref().expect("set above"))
    }

    fn run_dependence(&mut self) -> Result<DependenceArtifact> {
        let fits = self.fits.clone().expect("fitted");
        let residuals: Vec<Vec<f64>> = fits.iter().map(|f| f.residuals.clone()).collect();
        let pit = to_pit(&residuals, self.cfg.dependence.pit_bins)?;
        let rows = pit.rows;
        let dim = fits.len();
        let requested = self.cfg.dependence.kind;
        let mut notices = Vec::new();

        let mut copulas: Vec<CopulaFamily> = Vec::new();
        let mut vines: Vec<VineKind> = Vec::new();
        match (requested.copula_family(), requested.vine_kind()) {
            (Some(f), _) => copulas.push(f),
            (_, Some(k)) if dim >= 3 => vines.push(k),
            (_, Some(k)) => {
                notices.push(format!(
                    "a {} needs at least 3 assets; with {dim} the bivariate copula with the lowest BIC is used instead",
                    k.name()
                ));
                copulas.extend(CopulaFamily::ALL);
            }
            _ => {
                copulas.extend(CopulaFamily::ALL);
                if dim >= 3 {
                    vines.extend(VineKind::ALL);
                } else {
                    notices.push(format!("vines need at least 3 assets; only copulas were compared for {dim}"));
                }
            }
        }

        let b = self.cfg.dependence.gof_bootstrap;
        let mut tried: Vec<(String, &'static str, std::result::Result<Dependence, String>)> = Vec::new();
        for (k, fam) in copulas.iter().enumerate() {
            let seed = rng::mix(rng::mix(self.cfg.seed, TAG_GOF), k as u64);
            let res = fit_copula_rows(*fam, &rows).and_then(|mut m| {
                m.gof_p = Some(gof_test(&m, &rows, b, seed)?.p_value);
                Ok(Dependence::Copula(m))
            });
            tried.push((fam.name().to_string(), "copula", res.map_err(|e| e.to_string())));
        }
        for (k, kind) in vines.iter().enumerate() {
            let seed = rng::mix(rng::mix(self.cfg.seed, TAG_GOF), 100 + k as u64);
            let res = select_vine(&rows, *kind, &DEFAULT_PAIR_FAMILIES).and_then(|mut m| {
                m.gof_p = Some(vine_gof(&m, &rows, b, seed)?.p_value);
                Ok(Dependence::Vine(m))
            });
            tried.push((kind.name().to_string(), "vine", res.map_err(|e| e.to_string())));
        }
        for (name, _, r) in &tried {
            if let Err(e) = r {
                notices.push(format!("{name} could not be fitted: {e}"));
            }
        }
        let best = tried
            .iter()
            .enumerate()
            .filter_map(|(i, (_, _, r))| r.as_ref().ok().map(|d| (i, d.bic())))
            .filter(|(_, bic)| bic.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .ok_or(Error::AllModelsFailed { tried: tried.len() })?;
        let comparison: Vec<ComparisonRow> = tried
            .iter()
            .enumerate()
            .map(|(i, (name, class, r))| match r {
                Ok(d) => ComparisonRow {
                    model: name.clone(),
                    class: class.to_string(),
                    loglik: Some(d.loglik()),
                    n_params: Some(d.n_params()),
                    gof_p: d.gof_p(),
                    aic: Some(d.aic()),
                    bic: Some(d.bic()),
                    selected: i == best,
                    error: None,
                },
                Err(e) => ComparisonRow {
                    model: name.clone(),
                    class: class.to_string(),
                    loglik: None,
                    n_params: None,
                    gof_p: None,
                    aic: None,
                    bic: None,
                    selected: false,
                    error: Some(e.clone()),
                },
            })
            .collect();
        let selected = tried[best].2.clone().expect("best is a success");
        for n in &notices {
            self.notice(n.clone());
        }

        let table = comparison.clone();
        self.art.write_csv("dependence/comparison.csv", |w| {
            let mut out = csv_writer(w);
            out.write_record(["model", "class", "gof_p", "aic", "bic", "loglik", "n_params", "selected"])?;
            let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &table {
                out.write_record([
                    r.model.clone(),
                    r.class.clone(),
                    num(r.gof_p),
                    num(r.aic),
                    num(r.bic),
                    num(r.loglik),
                    r.n_params.map(|k| k.to_string()).unwrap_or_default(),
                    r.selected.to_string(),
                ])?;
            }
            out.flush()?;
            Ok(())
        })?;
        let copula_models: Vec<_> = tried
            .iter()
            .filter_map(|(_, _, r)| match r {
                Ok(Dependence::Copula(m)) => Some(m.clone()),
                _ => None,
            })
            .collect();
        if !copula_models.is_empty() {
            self.art.write_csv("dependence/copulas.csv", |w| write_comparison_csv(w, &copula_models))?;
        }
        let vine_models: Vec<_> = tried
            .iter()
            .filter_map(|(_, _, r)| match r {
                Ok(Dependence::Vine(m)) => Some(m.clone()),
                _ => None,
            })
            .collect();
        if !vine_models.is_empty() {
            self.art.write_csv("dependence/vines.csv", |w| write_vine_comparison_csv(w, &vine_models))?;
        }
        let sources: Vec<PitSelection> = pit.sources;
        self.art.write_json("dependence/pit.json", &sources)?;
        let artifact = DependenceArtifact { requested, selected, comparison, notices };
        self.art.write_json("dependence/model.json", &artifact)?;
        Ok(artifact)
    }

    fn simulation_config(&mut self, horizon: usize, tag: u64) -> Result<SimulationConfig> {
        let fits = self.fit()?.to_vec();
        let dependence = self.dependence()?.selected.clone();
        let marginals = fits.iter().map(MarginalStart::from_fitted).collect();
        Ok(SimulationConfig {
            n_paths: self.cfg.simulation.n_paths,
            ..SimulationConfig::new(dependence, marginals, horizon, rng::mix(self.cfg.seed, tag))
        })
    }

    /// Forward simulation to the longest configured horizon.
    pub fn simulate(&mut self) -> Result<&SimulatedReturns> {
        if self.simulation.is_none() {
            let cfg = self.simulation_config(self.cfg.simulation.horizon(), TAG_SIM)?;
            let cached = self
                .art
                .load_json::<SimulationSidecar>(&format!("{SIMULATION_FILE}.json"))
                .zip(self.art.load_bytes(SIMULATION_FILE))
                .and_then(|(meta, bytes)| SimulatedReturns::from_bytes(meta, &bytes).ok());
            let sim = match cached {
                Some(s) => s,
                None => {
                    let s = simulate_joint_returns(&cfg)?;
                    self.art.write_binary(SIMULATION_FILE, &s.to_bytes(), &s.sidecar())?;
                    s
                }
            };
            self.simulation = Some(sim);
        }
        Ok(self.simulation.as_ref().expect("set above"))
    }

    /// Optimal weights from simulated (or historical) moments, with in-sample
    /// and fixed-horizon simulated performance.
    pub fn optimize(&mut self) -> Result<&OptimizeArtifact> {
        if self.optimized.is_none() {
            let cached = self.art.load_json::<OptimizeArtifact>("optimize/result.json");
            let out = match cached {
                Some(o) => o,
                None => self.run_optimize()?,
            };
            self.optimized = Some(out);
        }
        Ok(self.optimized.as_ref().expect("set above"))
    }

    fn run_optimize(&mut self) -> Result<OptimizeArtifact> {
        let fits = self.fit()?.to_vec();
        let assets: Vec<String> = fits.iter().map(|f| f.asset_id.clone()).collect();
        let ing = self.ingest()?.clone();
        let idx: Vec<usize> = assets.iter().map(|a| ing.assets.iter().position(|b| b == a).expect("fitted asset")).collect();
        let hist: Vec<Vec<f64>> = ing.fit_rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
        let sim = self.simulate()?.clone();
        let o = self.cfg.optimize.clone();
        let moments = match o.moments {
            MomentsFrom::Simulated => covariance_from_simulation(&sim.data, sim.n_assets())?,
            MomentsFrom::Historical => MomentEstimates::historical(&hist)?,
        };
        if moments.ridge {
            self.notice("the moment covariance was rank deficient; a 1e-10 ridge was added".into());
        }
        let portfolio = match o.target {
            Objective::MinVariance => min_variance(&moments, o.bound)?,
            Objective::Tangency => tangency(&moments, o.bound, o.risk_free)?,
        };
        let in_sample = performance_report(&portfolio_returns(&hist, &portfolio.weights), o.risk_free).ok();
        let horizons = self
            .cfg
            .simulation
            .horizons
            .iter()
            .map(|&h| {
                let slice = SimulatedReturns { horizon: h, data: sim.window_flat(0..h), innovations: Vec::new(), ..sim.clone() };
                match evaluate_fixed_horizon(&portfolio.weights, ReturnSource::Simulated(&slice), o.risk_free) {
                    Ok(r) => HorizonReport { horizon: h, report: Some(r), error: None },
                    Err(e) => HorizonReport { horizon: h, report: None, error: Some(e.to_string()) },
                }
            })
            .collect();
        let out = OptimizeArtifact { assets: assets.clone(), moments: o.moments, ridge: moments.ridge, portfolio, in_sample, horizons };
        let p = out.portfolio.clone();
        self.art.write_csv("optimize/weights.csv", |w| p.write_csv(w, &assets))?;
        self.art.write_json("optimize/result.json", &out)?;
        Ok(out)
    }

    /// Rolling rebalance over `backtest.horizon` days in `backtest.window`-day windows.
    pub fn backtest(&mut self) -> Result<&BacktestArtifact> {
        if self.backtest.is_none() {
            let cached = self.art.load_json::<BacktestArtifact>("backtest/windows.json");
            let out = match cached {
                Some(b) => b,
                None => self.run_backtest()?,
            };
            self.backtest = Some(out);
        }
        Ok(self.backtest.as_ref().expect("set above"))
    }

    fn run_backtest(&mut self) -> Result<BacktestArtifact> {
        let sim = self.simulation_config(self.cfg.backtest.horizon, TAG_BACKTEST)?;
        let ing = self.ingest()?.clone();
        let fits = self.fit()?.to_vec();
        let c = self.cfg.clone();
        let bt = BacktestConfig {
            window_days: c.backtest.window,
            total_horizon: c.backtest.horizon,
            target: c.optimize.target,
            bound: c.optimize.bound,
            risk_free: c.optimize.risk_free,
            update: c.backtest.update,
        };
        let idx: Vec<usize> = fits.iter().map(|f| ing.assets.iter().position(|b| b == &f.asset_id).expect("fitted asset")).collect();
        let pick = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect() };
        let holdout = pick(&ing.holdout);
        let refitter = PipelineRefit {
            cfg: c.clone(),
            history: pick(&ing.fit_rows),
            fits: fits.clone(),
            dependence: sim.dependence.clone(),
        };
        let eval = match c.backtest.evaluation {
            BacktestEvaluation::Simulated => Evaluation::Simulated,
            BacktestEvaluation::Holdout => Evaluation::Realized(&holdout),
        };
        let result = rolling_backtest(&bt, &sim, eval, Some(&refitter))?;
        for w in &result.windows {
            if let Some(e) = &w.optimization_error {
                self.notice(format!("window {}: optimization failed ({e}); previous weights kept", w.index + 1));
            }
            if w.truncated {
                self.notice(format!("window {} is truncated to {} days", w.index + 1, w.days));
            }
        }
        let out = BacktestArtifact {
            window: c.backtest.window,
            horizon: c.backtest.horizon,
            evaluation: c.backtest.evaluation,
            update: c.backtest.update,
            target: c.optimize.target,
            result,
        };
        let res = out.result.clone();
        self.art.write_csv("backtest/weights.csv", |w| {
            let mut o = csv_writer(w);
            o.write_record(["window", "start_day", "days", "asset_id", "weight"])?;
            for win in &res.windows {
                for (a, x) in res.assets.iter().zip(&win.weights) {
                    o.write_record([
                        (win.index + 1).to_string(),
                        win.start_day.to_string(),
                        win.days.to_string(),
                        a.clone(),
                        x.to_string(),
                    ])?;
                }
            }
            o.flush()?;
            Ok(())
        })?;
        self.art.write_json("backtest/windows.json", &out)?;
        Ok(out)
    }

    /// Collects every stage into one summary document.
    pub fn report(&mut self) -> Result<Report> {
        let ing = self.ingest()?.clone();
        let summary = self.art.load_json::<FitSummary>("fit/summary.json");
        let fits = self.fit()?.to_vec();
        let marginals = summary.map_or_else(|| fits.iter().map(MarginalRow::of).collect(), |s| s.table);
        let dependence = self.dependence()?.clone();
        let sim = self.simulate()?.sidecar();
        let optimize = self.optimize()?.clone();
        let backtest = self.backtest()?.clone();
        let report = Report {
            config_hash: self.art.hash().to_string(),
            assets: fits.iter().map(|f| f.asset_id.clone()).collect(),
            exclusions: ing.exclusions,
            marginals,
            dependence: dependence.comparison,
            selected_dependence: dependence.selected.name().to_string(),
            simulation: sim,
            optimization: optimize,
            backtest: backtest.result.windows,
            notices: self.notices.clone(),
        };
        self.art.write_json("report.json", &report)?;
        Ok(report)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub assets: Vec<String>,
    pub exclusions: Vec<ExclusionEntry>,
    pub marginals: Vec<MarginalRow>,
    pub dependence: Vec<ComparisonRow>,
    pub selected_dependence: String,
    pub simulation: SimulationSidecar,
    pub optimization: OptimizeArtifact,
    pub backtest: Vec<garch_copula::simulation::WindowReport>,
    pub notices: Vec<String>,
}

fn csv_writer(w: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(w)
}

/// Re-estimates with the selected specifications held fixed on the
/// estimation sample extended by the realized rows.
struct PipelineRefit {
    cfg: RunConfig,
    history: Vec<Vec<f64>>,
    fits: Vec<FittedMarginal>,
    dependence: Dependence,
}

impl Refitter for PipelineRefit {
    fn refit(&self, observed: &[Vec<f64>], _current: &SimulationConfig) -> garch_copula::Result<(Vec<MarginalStart>, Dependence)> {
        let rows: Vec<Vec<f64>> = self.history.iter().chain(observed).cloned().collect();
        let tag = rng::mix(TAG_REFIT, observed.len() as u64);
        let fits = self
            .fits
            .iter()
            .enumerate()
            .map(|(i, f)| fit_with(&f.asset_id, &column(&rows, i), candidate_of(f), &fit_options(&self.cfg, i, tag)))
            .collect::<garch_copula::Result<Vec<_>>>()?;
        let residuals: Vec<Vec<f64>> = fits.iter().map(|f| f.residuals.clone()).collect();
        let u = to_pit(&residuals, self.cfg.dependence.pit_bins)?.rows;
        let dependence = match &self.dependence {
            Dependence::Copula(m) => Dependence::Copula(fit_copula_rows(m.family, &u)?),
            Dependence::Vine(m) => Dependence::Vine(refit_vine(m, &u)?),
        };
        Ok((fits.iter().map(MarginalStart::from_fitted).collect(), dependence))
    }
}
