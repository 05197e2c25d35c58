//! Long-only Markowitz portfolios with a per-asset lower bound: minimum
//! variance and tangency (maximum Sharpe), plus return-series metrics.

mod qp;

use std::io::Write;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::optim::golden_section_max;
use crate::rng;
use crate::stats::{mean_and_covariance, summary_stats};
use qp::Qp;

/// Ridge added to a rank-deficient covariance.
pub const RIDGE: f64 = 1e-10;
/// Minimum number of simulated vectors for a covariance estimate.
pub const MIN_SIMULATED_VECTORS: usize = 1000;
/// Independent starts used to verify the tangency solution.
pub const TANGENCY_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Historical,
    Simulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub mu: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub source: MomentSource,
    /// Set when `RIDGE·I` was added because `sigma` was rank deficient.
    pub ridge: bool,
    /// Assets whose variance is zero (before any ridge).
    pub degenerate_assets: Vec<usize>,
}

impl MomentEstimates {
    /// Checks shapes and symmetry, records zero-variance assets and adds the
    /// ridge when the smallest eigenvalue is not clearly positive.
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>, source: MomentSource) -> Result<Self> {
        let n = mu.len();
        if n == 0 || sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::InvalidParameters(format!("moments need a {n}×{n} covariance")));
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("non-finite moment estimate".into()));
        }
        let mut sigma = (&sigma + sigma.transpose()) * 0.5;
        let scale = sigma.diagonal().amax();
        // Rounding noise on a constant series leaves a variance far below any real return scale.
        let floor = (1e-14 * scale).max(1e-30);
        let degenerate_assets: Vec<usize> = (0..n).filter(|&i| !(sigma[(i, i)] > floor)).collect();
        let eig = sigma.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if lo < -1e-8 * hi.max(1e-300) {
            return Err(Error::InvalidParameters(format!("covariance is not positive semidefinite (eigenvalue {lo:e})")));
        }
        let ridge = !(lo > 1e-12 * hi);
        if ridge {
            for i in 0..n {
                sigma[(i, i)] += RIDGE;
            }
        }
        Ok(MomentEstimates { mu, sigma, source, ridge, degenerate_assets })
    }

    /// Sample mean and covariance of historical return rows (`T × N`).
    pub fn historical(returns: &[Vec<f64>]) -> Result<Self> {
        let n = returns.first().map_or(0, Vec::len);
        if returns.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: returns.len() });
        }
        let (mu, sigma, _) = mean_and_covariance(returns.iter().map(Vec::as_slice), n);
        Self::new(mu, sigma, MomentSource::Historical)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn portfolio_return(&self, w: &[f64]) -> f64 {
        self.mu.iter().zip(w).map(|(m, x)| m * x).sum()
    }

    pub fn portfolio_variance(&self, w: &[f64]) -> f64 {
        let n = w.len();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += w[i] * w[j] * self.sigma[(i, j)];
            }
        }
        v.max(0.0)
    }

    fn sharpe(&self, w: &[f64], risk_free: f64) -> f64 {
        (self.portfolio_return(w) - risk_free) / self.portfolio_variance(w).sqrt()
    }
}

/// Moments over every simulated `(path, step)` return vector; `data` is
/// row-major with `n_assets` values per vector.
pub fn covariance_from_simulation(data: &[f64], n_assets: usize) -> Result<MomentEstimates> {
    if n_assets == 0 || !data.len().is_multiple_of(n_assets) {
        return Err(Error::InvalidParameters("simulated data is not a whole number of return vectors".into()));
    }
    let count = data.len() / n_assets;
    if count < MIN_SIMULATED_VECTORS {
        return Err(Error::InsufficientData { needed: MIN_SIMULATED_VECTORS, got: count });
    }
    let (mu, sigma, _) = mean_and_covariance(data.chunks_exact(n_assets), n_assets);
    MomentEstimates::new(mu, sigma, MomentSource::Simulated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinVariance,
    Tangency,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub qp_iterations: usize,
    pub kkt_residual: f64,
    /// Tangency only: largest objective gap between the frontier search and the verification starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts_agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub objective: Objective,
    pub weights: Vec<f64>,
    pub bound: f64,
    /// Portfolio variance (min-variance) or Sharpe ratio (tangency).
    pub achieved: f64,
    pub expected_return: f64,
    pub std_dev: f64,
    pub diagnostics: Diagnostics,
}

impl PortfolioWeights {
    /// Writes `asset_id,weight`.
    pub fn write_csv<W: Write>(&self, w: W, asset_ids: &[String]) -> Result<()> {
        if asset_ids.len() != self.weights.len() {
            return Err(Error::InvalidParameters("one asset id per weight is needed".into()));
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["asset_id", "weight"])?;
        for (id, x) in asset_ids.iter().zip(&self.weights) {
            out.write_record([id.as_str(), &x.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check(m: &MomentEstimates, bound: f64) -> Result<()> {
    let n = m.dim();
    if !m.degenerate_assets.is_empty() {
        return Err(Error::DegenerateSeries(format!("assets {:?} have zero variance", m.degenerate_assets)));
    }
    if !(0.0..=1.0).contains(&bound) || bound * n as f64 > 1.0 + 1e-12 {
        return Err(Error::InfeasibleConstraints(format!("lower bound {bound} with {n} assets cannot sum to 1")));
    }
    Ok(())
}

/// Clamps into the box and spreads any residual of `Σw − 1` over the
/// coordinates with room, so feasibility holds to rounding.
fn polish(w: &mut [f64], bound: f64) {
    for x in w.iter_mut() {
        *x = x.clamp(bound, 1.0);
    }
    for _ in 0..3 {
        let gap = 1.0 - w.iter().sum::<f64>();
        if gap.abs() <= 1e-15 {
            break;
        }
        let room: Vec<usize> =
            (0..w.len()).filter(|&i| if gap > 0.0 { w[i] < 1.0 } else { w[i] > bound }).collect();
        let Some(&i) = room.iter().max_by(|&&a, &&b| {
            let ra = if gap > 0.0 { 1.0 - w[a] } else { w[a] - bound };
            let rb = if gap > 0.0 { 1.0 - w[b] } else { w[b] - bound };
            ra.total_cmp(&rb)
        }) else {
            break;
        };
        w[i] = (w[i] + gap).clamp(bound, 1.0);
    }
}

fn uniform_start(n: usize, bound: f64) -> Vec<f64> {
    vec![bound + (1.0 - bound * n as f64) / n as f64; n]
}

fn qp_min_variance(m: &MomentEstimates, bound: f64, target: Option<(f64, &[f64])>) -> Result<qp::QpSolution> {
    let n = m.dim();
    let mut a = vec![vec![1.0; n]];
    let mut b = vec![1.0];
    let start = match target {
        Some((t, x0)) => {
            a.push(m.mu.clone());
            b.push(t);
            x0.to_vec()
        }
        None => uniform_start(n, bound),
    };
    let q = &m.sigma * 2.0;
    Qp { q: &q, c: vec![0.0; n], a, b, lo: vec![bound; n], hi: vec![1.0; n] }.solve(&start)
}

/// Minimizes `wᵀΣw` subject to `Σw = 1` and `bound ≤ w ≤ 1`.
pub fn min_variance(m: &MomentEstimates, bound: f64) -> Result<PortfolioWeights> {
    check(m, bound)?;
    let s = qp_min_variance(m, bound, None)?;
    let mut w = s.x;
    polish(&mut w, bound);
    let var = m.portfolio_variance(&w);
    Ok(PortfolioWeights {
        objective: Objective::MinVariance,
        expected_return: m.portfolio_return(&w),
        std_dev: var.sqrt(),
        achieved: var,
        weights: w,
        bound,
        diagnostics: Diagnostics { qp_iterations: s.iterations, kkt_residual: s.kkt_residual, ..Default::default() },
    })
}

/// Euclidean projection onto `{Σw = 1, bound ≤ w ≤ 1}`.
fn project(y: &[f64], bound: f64) -> Vec<f64> {
    let total = |t: f64| y.iter().map(|v| (v - t).clamp(bound, 1.0)).sum::<f64>();
    let (mut lo, mut hi) = (
        y.iter().fold(f64::INFINITY, |m, v| m.min(*v)) - 1.0,
        y.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)),
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mut w: Vec<f64> = y.iter().map(|v| (v - t).clamp(bound, 1.0)).collect();
    polish(&mut w, bound);
    w
}

/// Projected gradient ascent on the Sharpe ratio with backtracking.
fn ascend(m: &MomentEstimates, risk_free: f64, bound: f64, mut w: Vec<f64>) -> (Vec<f64>, f64) {
    let n = w.len();
    let mut f = m.sharpe(&w, risk_free);
    let mut step = 1.0;
    for _ in 0..20_000 {
        let sw: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.sigma[(i, j)] * w[j]).sum()).collect();
        let var = m.portfolio_variance(&w);
        let sd = var.sqrt();
        let ex = m.portfolio_return(&w) - risk_free;
        let g: Vec<f64> = (0..n).map(|i| m.mu[i] / sd - ex * sw[i] / (var * sd)).collect();
        let mut improved = false;
        while step > 1e-14 {
            let y: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x + step * d).collect();
            let cand = project(&y, bound);
            let fc = m.sharpe(&cand, risk_free);
            if fc > f {
                improved = fc - f > 1e-15 * f.abs().max(1.0);
                w = cand;
                f = fc;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (w, f)
}

/// Maximizes `(wᵀμ − r_f)/√(wᵀΣw)` over the bounded simplex by a
/// golden-section search along the efficient frontier, then checks the
/// result against projected-gradient ascent from five starts.
pub fn tangency(m: &MomentEstimates, bound: f64, risk_free: f64) -> Result<PortfolioWeights> {
    check(m, bound)?;
    if m.mu.iter().all(|&x| x <= risk_free) {
        return Err(Error::NoPositiveExcessReturn { risk_free });
    }
    let n = m.dim();
    let mv = qp_min_variance(m, bound, None)?;
    let mut w_mv = mv.x;
    polish(&mut w_mv, bound);
    let top = (0..n).max_by(|&a, &b| m.mu[a].total_cmp(&m.mu[b])).expect("n > 0");
    let mut w_max = vec![bound; n];
    w_max[top] = 1.0 - bound * (n - 1) as f64;
    let (t0, t1) = (m.portfolio_return(&w_mv), m.portfolio_return(&w_max));

    let mut iters = mv.iterations;
    let mut kkt = mv.kkt_residual;
    let mut best = (w_mv.clone(), m.sharpe(&w_mv, risk_free));
    let consider = |w: Vec<f64>, best: &mut (Vec<f64>, f64)| {
        let s = m.sharpe(&w, risk_free);
        if s > best.1 {
            *best = (w, s);
        }
        s
    };
    consider(w_max.clone(), &mut best);
    if t1 - t0 > 1e-14 * t1.abs().max(t0.abs()).max(1e-300) {
        let frontier = |t: f64| -> Option<(Vec<f64>, usize, f64)> {
            let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let x0: Vec<f64> = w_mv.iter().zip(&w_max).map(|(a, b)| (1.0 - s) * a + s * b).collect();
            let sol = qp_min_variance(m, bound, Some((t, &x0))).ok()?;
            let mut w = sol.x;
            polish(&mut w, bound);
            Some((w, sol.iterations, sol.kkt_residual))
        };
        let mut seen: Vec<(Vec<f64>, usize, f64)> = Vec::new();
        let (t_star, _) = golden_section_max(
            |t| match frontier(t) {
                Some(r) => {
                    let s = m.sharpe(&r.0, risk_free);
                    seen.push(r);
                    s
                }
                None => f64::NEG_INFINITY,
            },
            t0,
            t1,
            1e-12 * (t1 - t0).max(t1.abs()),
        );
        iters += seen.iter().map(|r| r.1).sum::<usize>();
        if let Some((w, it, res)) = frontier(t_star) {
            iters += it;
            kkt = kkt.max(res);
            consider(w, &mut best);
        }
    }

    let mut r = rng::seeded(0x7A6E_6E37);
    let mut starts = vec![uniform_start(n, bound)];
    while starts.len() < TANGENCY_STARTS {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut r)).collect();
        let total: f64 = e.iter().sum();
        let free = 1.0 - bound * n as f64;
        starts.push(e.iter().map(|x| bound + free * x / total).collect());
    }
    let runs: Vec<(Vec<f64>, f64)> = starts.into_iter().map(|s| ascend(m, risk_free, bound, s)).collect();
    let frontier_best = best.1;
    for (w, s) in &runs {
        if *s > best.1 {
            best = (w.clone(), *s);
        }
    }
    let spread = runs.iter().map(|(_, s)| (frontier_best - s).abs()).fold(0.0f64, f64::max);
    let (w, s) = best;
    Ok(PortfolioWeights {
        objective: Objective::Tangency,
        expected_return: m.portfolio_return(&w),
        std_dev: m.portfolio_variance(&w).sqrt(),
        achieved: s,
        weights: w,
        bound,
        diagnostics: Diagnostics {
            qp_iterations: iters,
            kkt_residual: kkt,
            start_spread: Some(spread),
            starts_agree: Some(spread <= 1e-6),
        },
    })
}

/// `(mean − r_f)/std` per observation period, with the sample standard deviation.
pub fn sharpe_ratio(returns: &[f64], risk_free: f64) -> Result<f64> {
    let s = summary_stats(returns)?;
    Ok((s.mean - risk_free) / s.std_dev)
}

/// `SR·[1 + (S/6)·SR − (K/24)·SR²]` with skewness `S` and excess kurtosis `K`.
pub fn adjusted_sharpe_from(sr: f64, skewness: f64, excess_kurtosis: f64) -> f64 {
    sr * (1.0 + skewness / 6.0 * sr - excess_kurtosis / 24.0 * sr * sr)
}

pub fn adjusted_sharpe(returns: &[f64], risk_free: f64) -> Result<f64> {
    let s = summary_stats(returns)?;
    Ok(adjusted_sharpe_from((s.mean - risk_free) / s.std_dev, s.skewness, s.excess_kurtosis))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub expected_return: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub sharpe: f64,
    pub adjusted_sharpe: f64,
}

pub fn performance_report(returns: &[f64], risk_free: f64) -> Result<PerformanceReport> {
    let s = summary_stats(returns)?;
    let sharpe = (s.mean - risk_free) / s.std_dev;
    Ok(PerformanceReport {
        expected_return: s.mean,
        std_dev: s.std_dev,
        skewness: s.skewness,
        excess_kurtosis: s.excess_kurtosis,
        sharpe,
        adjusted_sharpe: adjusted_sharpe_from(sharpe, s.skewness, s.excess_kurtosis),
    })
}

/// `Σ_i w_i r_{t,i}` for each row of `returns`.
pub fn portfolio_returns(returns: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    returns.iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}
