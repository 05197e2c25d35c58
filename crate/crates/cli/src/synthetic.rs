//! Synthetic price panels with GARCH-family margins and t-copula dependence.

use chrono::{Days, NaiveDate};
use garch_copula::copulas::CopulaModel;
use garch_copula::garch::{ArmaSpec, GarchSpec, InnovationSpec, ModelSpec, Variant};
use garch_copula::ingestion::{PricePanel, PriceSeries};
use garch_copula::rng;
use garch_copula::simulation::{simulate_joint_returns, Dependence, MarginalStart, SimulationConfig};
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_assets: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Share of interior prices blanked in every asset (repaired by interpolation).
    pub gap_fraction: f64,
    /// Adds one extra asset missing about a fifth of its prices.
    pub sparse_asset: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { n_assets: 5, n_days: 1000, seed: 1, gap_fraction: 0.01, sparse_asset: false }
    }
}

fn margin(i: usize) -> ModelSpec {
    let mean = 0.0004 + 0.0002 * (i % 4) as f64;
    let garch = match i % 3 {
        0 => GarchSpec::garch(4e-6, vec![0.08], vec![0.9]),
        1 => GarchSpec {
            variant: Variant::Egarch,
            q: 1,
            p: 1,
            omega: -0.35,
            arch: vec![-0.05],
            asymmetry: vec![0.15],
            garch: vec![0.95],
        },
        _ => GarchSpec {
            variant: Variant::Gjr,
            q: 1,
            p: 1,
            omega: 6e-6,
            arch: vec![0.04],
            asymmetry: vec![0.08],
            garch: vec![0.88],
        },
    };
    let innovation = if i.is_multiple_of(2) { InnovationSpec::normal() } else { InnovationSpec::skew_normal(-1.0) };
    ModelSpec { arma: ArmaSpec::constant(mean), garch, innovation }
}

/// Daily prices starting at 100 on 2017-01-01, one row per calendar day.
pub fn synthetic_panel(spec: &SyntheticSpec) -> Result<PricePanel> {
    let n = spec.n_assets + usize::from(spec.sparse_asset);
    let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.25 + 0.3 / (1.0 + i.abs_diff(j) as f64) });
    let dependence = Dependence::Copula(CopulaModel::t(&corr, 5.0)?);
    let marginals = (0..n).map(|i| MarginalStart::stationary(format!("ASSET{}", i + 1), margin(i))).collect();
    let burn = 250;
    let cfg = SimulationConfig {
        n_paths: 1,
        ..SimulationConfig::new(dependence, marginals, spec.n_days + burn, spec.seed)
    };
    let sim = simulate_joint_returns(&cfg)?;
    let start = NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date");
    let dates: Vec<NaiveDate> = (0..=spec.n_days).map(|d| start + Days::new(d as u64)).collect();
    let mut r = rng::seeded(rng::mix(spec.seed, 0x6761_7073));
    let assets = (0..n)
        .map(|i| {
            let mut p = 100.0;
            let mut prices = vec![Some(p)];
            for d in 0..spec.n_days {
                p *= sim.get(0, burn + d, i).exp();
                prices.push(Some(p));
            }
            let frac = if spec.sparse_asset && i == n - 1 { 0.2 } else { spec.gap_fraction };
            for slot in prices.iter_mut().take(spec.n_days).skip(1) {
                if r.random::<f64>() < frac {
                    *slot = None;
                }
            }
            PriceSeries::new(format!("ASSET{}", i + 1), dates.clone(), prices)
        })
        .collect::<garch_copula::Result<Vec<_>>>()?;
    Ok(PricePanel { dates, assets })
}
