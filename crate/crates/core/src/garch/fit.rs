//! Maximum-likelihood fitting and BIC selection over the model grid.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{log_likelihood, Coefs, Trace};
use super::transform::Candidate;
use super::{skew_normal_abs_mean, FittedMarginal, Innovation, ModelSpec, Presample, Variant, MAX_ORDER};
use crate::error::{Error, Result};
use crate::numeric::dual::{value_and_gradient, Real};
use crate::numeric::optim::{bfgs, BfgsOptions, OptimResult};
use crate::rng;
use crate::stats;

/// Hard minimum sample size for a fit.
pub const MIN_OBS: usize = 100;
/// About one trading year.
pub const RECOMMENDED_OBS: usize = 250;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Perturbed restarts after the default start.
    pub restarts: usize,
    pub seed: u64,
    pub bfgs: BfgsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 3, seed: 0x6A4C_4C0E, bfgs: BfgsOptions::default() }
    }
}

fn abs_mean_of<R: Real>(dist: Innovation) -> impl Fn(R) -> R {
    move |c: R| match dist {
        Innovation::Normal => R::cst((2.0 / std::f64::consts::PI).sqrt()),
        Innovation::SkewNormal => {
            let v = c.value();
            let h = 1e-6 * (1.0 + v.abs());
            let d = (skew_normal_abs_mean(v + h) - skew_normal_abs_mean(v - h)) / (2.0 * h);
            c.chain(skew_normal_abs_mean(v), d)
        }
    }
}

/// Mean negative log-likelihood and its gradient in optimizer coordinates.
fn objective(cand: &Candidate, r: &[f64], pre: &Presample, x: &[f64], g: &mut [f64]) -> f64 {
    let t = r.len() as f64;
    macro_rules! eval {
        ($n:literal) => {
            value_and_gradient::<$n, _>(
                |v| {
                    let c = cand.decode(v, abs_mean_of(cand.dist));
                    -log_likelihood(&c, r, pre, None) / t
                },
                x,
                g,
            )
        };
    }
    let v = match x.len() {
        0..=4 => eval!(4),
        5..=8 => eval!(8),
        9..=12 => eval!(12),
        _ => eval!(16),
    };
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn check_returns(r: &[f64]) -> Result<f64> {
    if r.len() < MIN_OBS {
        return Err(Error::InsufficientData { needed: MIN_OBS, got: r.len() });
    }
    if let Some(bad) = r.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameters(format!("non-finite return {bad}")));
    }
    let s = stats::std_dev(r);
    if !(s > 0.0) || r.iter().all(|&x| x == r[0]) {
        return Err(Error::DegenerateSeries("returns have zero variance".into()));
    }
    Ok(s)
}

/// Maps a model fitted to `r / s` back to the scale of `r`.
fn unscale(spec: &mut ModelSpec, s: f64) {
    spec.arma.mean *= s;
    let g = &mut spec.garch;
    match g.variant {
        Variant::Egarch => {
            let psi: f64 = g.garch.iter().sum();
            g.omega += (1.0 - psi) * (s * s).ln();
        }
        _ => g.omega *= s * s,
    }
}

/// Fits one grid candidate. Returns are divided by their sample standard
/// deviation before optimization and the estimates mapped back, so the fit is
/// exactly scale equivariant.
pub fn fit_with(asset_id: &str, r: &[f64], cand: Candidate, opts: &FitOptions) -> Result<FittedMarginal> {
    if cand.m > 1 || cand.n > 1 || !(1..=MAX_ORDER).contains(&cand.q) || !(1..=MAX_ORDER).contains(&cand.p) {
        return Err(Error::InvalidParameters(format!("unsupported orders {cand:?}")));
    }
    let s = check_returns(r)?;
    let scaled: Vec<f64> = r.iter().map(|x| x / s).collect();
    let pre_scaled = Presample::from_returns(&scaled);
    let f = |x: &[f64], g: &mut [f64]| objective(&cand, &scaled, &pre_scaled, x, g);

    let x0 = cand.start(pre_scaled.mean);
    let mut runs: Vec<OptimResult> = vec![bfgs(f, &x0, &opts.bfgs)];
    let mut noise = rng::substream(opts.seed, candidate_tag(&cand));
    for _ in 0..opts.restarts {
        let x: Vec<f64> = x0.iter().map(|v| v + 0.5 * noise.sample::<f64, _>(StandardNormal)).collect();
        runs.push(bfgs(f, &x, &opts.bfgs));
    }
    let best_any = runs.iter().min_by(|a, b| a.value.total_cmp(&b.value)).expect("at least one run");
    let Some(best) = runs.iter().filter(|r| r.converged && r.value.is_finite()).min_by(|a, b| a.value.total_cmp(&b.value))
    else {
        return Err(Error::FitDiverged {
            reason: format!("{cand:?}: no start converged (gradient norm {:.2e})", best_any.grad_norm),
            best_loglik: -best_any.value * r.len() as f64 - r.len() as f64 * s.ln(),
            best_params: best_any.x.clone(),
        });
    };

    let coefs = cand.decode(&best.x, abs_mean_of::<f64>(cand.dist));
    let mut model = cand.to_spec(&coefs);
    unscale(&mut model, s);
    model.validate()?;
    let presample = Presample::from_returns(r);
    let mut trace = Trace::default();
    let loglik = log_likelihood(&Coefs::from_spec(&model), r, &presample, Some(&mut trace));
    if !loglik.is_finite() {
        return Err(Error::FitDiverged {
            reason: format!("{cand:?}: non-finite likelihood at the optimum"),
            best_loglik: loglik,
            best_params: best.x.clone(),
        });
    }
    let k = model.n_params();
    let t = r.len() as f64;
    let bic = k as f64 * t.ln() - 2.0 * loglik;
    Ok(FittedMarginal {
        asset_id: asset_id.to_string(),
        model,
        presample,
        loglik,
        aic: 2.0 * k as f64 - 2.0 * loglik,
        bic,
        bic_per_obs: bic / t,
        n_params: k,
        converged: true,
        returns: r.to_vec(),
        cond_mean: trace.cond_mean,
        cond_sd: trace.cond_sd,
        residuals: trace.residuals,
    })
}

fn candidate_tag(c: &Candidate) -> u64 {
    let v = Variant::ALL.iter().position(|&v| v == c.variant).unwrap_or(0) as u64;
    let d = u64::from(c.dist == Innovation::SkewNormal);
    ((((v * 2 + c.m as u64) * 2 + c.n as u64) * 4 + c.q as u64) * 4 + c.p as u64) * 2 + d
}

/// Fits ARMA(m, n) with the given variance variant, orders `(q, p)` and innovation law.
pub fn fit(r: &[f64], arma: (usize, usize), garch: (usize, usize), variant: Variant, dist: Innovation) -> Result<FittedMarginal> {
    let cand = Candidate { m: arma.0, n: arma.1, variant, q: garch.0, p: garch.1, dist };
    fit_with("", r, cand, &FitOptions::default())
}

/// How much of the order grid to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLimit {
    /// GARCH orders (q, p) restricted to (1, 1): 32 candidates.
    Small,
    /// GARCH orders up to (3, 3): 288 candidates.
    #[default]
    Full,
}

impl GridLimit {
    pub fn max_order(self) -> usize {
        match self {
            GridLimit::Small => 1,
            GridLimit::Full => MAX_ORDER,
        }
    }
}

impl std::str::FromStr for GridLimit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(GridLimit::Small),
            "full" => Ok(GridLimit::Full),
            _ => Err(Error::ConfigError(format!("grid limit must be `small` or `full`, got `{s}`"))),
        }
    }
}

/// Variants × ARMA (m, n) ∈ {0,1}² × GARCH (q, p) × innovation laws.
pub fn grid(limit: GridLimit) -> Vec<Candidate> {
    let k = limit.max_order();
    let mut out = Vec::new();
    for variant in Variant::ALL {
        for m in 0..=1 {
            for n in 0..=1 {
                for q in 1..=k {
                    for p in 1..=k {
                        for dist in Innovation::ALL {
                            out.push(Candidate { m, n, variant, q, p, dist });
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeagueRow {
    pub variant: Variant,
    pub m: usize,
    pub n: usize,
    pub q: usize,
    pub p: usize,
    pub dist: Innovation,
    pub converged: bool,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub bic_per_obs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub best: FittedMarginal,
    pub league: Vec<LeagueRow>,
}

/// Fits every grid candidate (in parallel) and keeps the converged one with the
/// smallest BIC. Failed candidates stay in the league table, marked.
pub fn select_best(asset_id: &str, r: &[f64], limit: GridLimit, opts: &FitOptions) -> Result<Selection> {
    check_returns(r)?;
    let cands = grid(limit);
    let fits: Vec<(Candidate, Result<FittedMarginal>)> =
        cands.par_iter().map(|&c| (c, fit_with(asset_id, r, c, opts))).collect();
    let league = fits
        .iter()
        .map(|(c, f)| {
            let ok = f.as_ref().ok();
            LeagueRow {
                variant: c.variant,
                m: c.m,
                n: c.n,
                q: c.q,
                p: c.p,
                dist: c.dist,
                converged: ok.is_some(),
                loglik: ok.map(|f| f.loglik),
                aic: ok.map(|f| f.aic),
                bic: ok.map(|f| f.bic),
                bic_per_obs: ok.map(|f| f.bic_per_obs),
            }
        })
        .collect();
    let best = fits
        .into_iter()
        .filter_map(|(_, f)| f.ok())
        .min_by(|a, b| a.bic.total_cmp(&b.bic))
        .ok_or(Error::AllModelsFailed { tried: cands.len() })?;
    Ok(Selection { best, league })
}

/// Writes `variant,m,n,q,p,dist,converged,loglik,aic,bic_per_obs`; failed rows leave the numbers empty.
pub fn write_league_csv<W: Write>(w: W, rows: &[LeagueRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["variant", "m", "n", "q", "p", "dist", "converged", "loglik", "aic", "bic_per_obs"])?;
    let num = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.variant.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.q.to_string(),
            r.p.to_string(),
            r.dist.name().to_string(),
            r.converged.to_string(),
            num(r.loglik),
            num(r.aic),
            num(r.bic_per_obs),
        ])?;
    }
    out.flush()?;
    Ok(())
}
