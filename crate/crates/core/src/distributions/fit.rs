//! Maximum-likelihood fitting by simplex search on unconstrained parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ged_excess_kurtosis, DistSpec, Family};
use crate::error::{Error, Result};
use crate::numeric::optim::{brent_root, nelder_mead, NelderMeadOptions};
use crate::rng;
use crate::stats;

pub const MIN_FIT_OBS: usize = 50;
const RESTARTS: usize = 5;
const MAX_DOF: f64 = 500.0;
const GED_NU_RANGE: (f64, f64) = (0.2, 50.0);
const MAX_SHAPE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedDist {
    #[serde(flatten)]
    pub spec: DistSpec,
    pub loglik: f64,
    #[serde(skip)]
    pub converged: bool,
}

/// Layout of the unconstrained parameter vector for a family:
/// `[a, ln b, (c), (ln(d − 2) | ln ν)]`.
fn decode(family: Family, x: &[f64]) -> Option<DistSpec> {
    let a = x[0];
    let b = x[1].exp();
    let mut i = 2;
    let c = if family.is_skewed() {
        i += 1;
        x[2]
    } else {
        0.0
    };
    let d = match family {
        Family::StudentT | Family::SkewT => 2.0 + x[i].exp(),
        Family::Ged | Family::SkewGed => x[i].exp(),
        _ => 0.0,
    };
    let ok = b.is_finite()
        && b > 0.0
        && c.abs() <= MAX_SHAPE
        && match family {
            Family::StudentT | Family::SkewT => d <= MAX_DOF,
            Family::Ged | Family::SkewGed => d >= GED_NU_RANGE.0 && d <= GED_NU_RANGE.1,
            _ => true,
        };
    ok.then_some(DistSpec { family, a, b, c, d })
}

fn encode(spec: &DistSpec) -> Vec<f64> {
    let mut x = vec![spec.a, spec.b.ln()];
    if spec.family.is_skewed() {
        x.push(spec.c);
    }
    match spec.family {
        Family::StudentT | Family::SkewT => x.push((spec.d - 2.0).ln()),
        Family::Ged | Family::SkewGed => x.push(spec.d.ln()),
        _ => {}
    }
    x
}

fn mean_neg_loglik(spec: &DistSpec, data: &[f64]) -> f64 {
    let s: f64 = data.iter().map(|&x| spec.ln_pdf(x)).sum();
    let v = -s / data.len() as f64;
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Moment-matched starting point.
fn start(family: Family, data: &[f64]) -> Result<DistSpec> {
    let m = stats::summary_stats(data)?;
    let d = match family {
        Family::StudentT | Family::SkewT => {
            if m.excess_kurtosis > 0.2 {
                (4.0 + 6.0 / m.excess_kurtosis).clamp(4.2, 60.0)
            } else {
                30.0
            }
        }
        Family::Ged | Family::SkewGed => {
            let k = m.excess_kurtosis.clamp(-1.0, 20.0);
            brent_root(|nu| ged_excess_kurtosis(nu) - k, 0.35, 40.0, 1e-8).unwrap_or(2.0)
        }
        _ => 0.0,
    };
    let c = if family.is_skewed() { (3.0 * m.skewness).clamp(-3.0, 3.0) } else { 0.0 };
    // The standardized skewed variable has E[Z²] = 1, so Var Z = 1 − (E Z)².
    let unit = DistSpec { family, a: 0.0, b: 1.0, c, d };
    let mz = unit.std_mean();
    let b = m.std_dev / (1.0 - mz * mz).max(0.05).sqrt();
    Ok(DistSpec { family, a: m.mean - b * mz, b, c, d })
}

/// Maximum-likelihood fit of `family` to `data`.
///
/// The normal family has a closed form; the others use simplex search from a
/// moment-based start followed by five perturbed restarts around the best point.
pub fn fit_mle(family: Family, data: &[f64]) -> Result<FittedDist> {
    if data.len() < MIN_FIT_OBS {
        return Err(Error::InsufficientData { needed: MIN_FIT_OBS, got: data.len() });
    }
    if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameters(format!("non-finite observation {bad}")));
    }
    let first = data[0];
    if data.iter().all(|&x| x == first) {
        return Err(Error::DegenerateSeries("constant data".into()));
    }
    if family == Family::Normal {
        let n = data.len() as f64;
        let mu = stats::mean(data);
        let sd = (data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
        let spec = DistSpec::normal(mu, sd);
        let loglik = data.iter().map(|&x| spec.ln_pdf(x)).sum();
        return Ok(FittedDist { spec, loglik, converged: true });
    }

    let s0 = start(family, data)?;
    // Work on data standardized by the starting location and scale so that
    // simplex steps have comparable size in every coordinate.
    let z: Vec<f64> = data.iter().map(|&x| (x - s0.a) / s0.b).collect();
    let objective = |x: &[f64]| match decode(family, x) {
        Some(spec) => mean_neg_loglik(&spec, &z),
        None => f64::INFINITY,
    };
    let unit = DistSpec { a: 0.0, b: 1.0, ..s0 };
    let x0 = encode(&unit);
    let step: Vec<f64> = x0.iter().map(|_| 0.25).collect();
    let opts = NelderMeadOptions { max_evals: 3000, f_tol: 1e-11, x_tol: 1e-7 };

    let mut best = nelder_mead(objective, &x0, &step, &opts);
    let mut converged = best.converged;
    let mut rng = rng::seeded(0x5EED_D157);
    for _ in 0..RESTARTS {
        let x: Vec<f64> = best.x.iter().map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        if !objective(&x).is_finite() {
            continue;
        }
        let r = nelder_mead(objective, &x, &step, &opts);
        if r.value < best.value - 1e-12 {
            converged = r.converged;
            best = r;
        } else if r.converged && (r.value - best.value).abs() <= 1e-9 {
            converged = true;
        }
    }

    let std_spec = decode(family, &best.x).expect("best point is feasible");
    let spec = DistSpec {
        a: s0.a + s0.b * std_spec.a,
        b: s0.b * std_spec.b,
        ..std_spec
    };
    let loglik = data.iter().map(|&x| spec.ln_pdf(x)).sum::<f64>();
    if !loglik.is_finite() || !converged {
        return Err(Error::FitDiverged {
            reason: format!("{family}: simplex search did not converge"),
            best_loglik: loglik,
            best_params: vec![spec.a, spec.b, spec.c, spec.d],
        });
    }
    Ok(FittedDist { spec, loglik, converged })
}
