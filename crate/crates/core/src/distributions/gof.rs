//! Kolmogorov–Smirnov and binned uniformity tests, and the PIT family choice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::{fit_mle, DistSpec, Family, FittedDist};
use crate::error::{Error, Result};

pub const DEFAULT_PIT_BINS: usize = 20;
/// Families considered when turning residuals into PITs.
pub const PIT_CANDIDATES: [Family; 5] = [Family::Normal, Family::StudentT, Family::SkewT, Family::Ged, Family::SkewGed];
/// PIT values are kept this far from 0 and 1.
pub const PIT_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * pi2 / (8.0 * lambda * lambda)).exp();
            s += term;
            if term < 1e-17 * s {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample K-S test of `data` against an arbitrary continuous CDF.
pub fn ks_test_with<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<TestResult> {
    if data.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: data.len() });
    }
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        let i = i as f64;
        d = d.max((i + 1.0) / n - f).max(f - i / n);
    }
    Ok(TestResult { statistic: d, p_value: kolmogorov_survival(n.sqrt() * d) })
}

pub fn ks_test(data: &[f64], spec: &DistSpec) -> Result<TestResult> {
    spec.validate()?;
    ks_test_with(data, |x| spec.cdf(x))
}

/// Pearson chi-square test of uniformity on `bins` equiprobable cells.
pub fn pit_uniformity_test(u: &[f64], bins: usize) -> Result<TestResult> {
    if bins < 2 {
        return Err(Error::InvalidParameters("at least two bins are required".into()));
    }
    if u.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut counts = vec![0usize; bins];
    for &v in u {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::DomainError(format!("PIT value {v} outside (0, 1)")));
        }
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = u.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = if stat <= 0.0 { 1.0 } else { gamma_ur((bins - 1) as f64 / 2.0, stat / 2.0) };
    Ok(TestResult { statistic: stat, p_value: p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub family: Family,
    pub fit: Option<FittedDist>,
    pub ks: Option<TestResult>,
    pub pit: Option<TestResult>,
    pub error: Option<String>,
}

impl CandidateReport {
    fn score(&self) -> Option<f64> {
        Some(self.ks?.p_value.min(self.pit?.p_value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitSelection {
    pub chosen: FittedDist,
    pub ks: TestResult,
    pub pit: TestResult,
    /// False when the chosen family fails either test at the 1% level.
    pub passes: bool,
    #[serde(skip)]
    pub u: Vec<f64>,
    pub candidates: Vec<CandidateReport>,
}

fn to_unit(spec: &DistSpec, z: &[f64]) -> Vec<f64> {
    z.iter().map(|&x| spec.cdf(x).clamp(PIT_CLAMP, 1.0 - PIT_CLAMP)).collect()
}

/// Fits every candidate family to `z`, picks the one with the largest
/// `min(K-S p, uniformity p)` (ties to fewer parameters) and returns its PITs.
pub fn select_pit_family(z: &[f64], bins: usize) -> Result<PitSelection> {
    let reports: Vec<(CandidateReport, Vec<f64>)> = PIT_CANDIDATES
        .par_iter()
        .map(|&family| match fit_mle(family, z) {
            Ok(fit) => {
                let u = to_unit(&fit.spec, z);
                let ks = ks_test(z, &fit.spec).ok();
                let pit = pit_uniformity_test(&u, bins).ok();
                (CandidateReport { family, fit: Some(fit), ks, pit, error: None }, u)
            }
            Err(e) => (CandidateReport { family, fit: None, ks: None, pit: None, error: Some(e.to_string()) }, Vec::new()),
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (r, _)) in reports.iter().enumerate() {
        let Some(s) = r.score() else { continue };
        best = match best {
            None => Some(i),
            Some(j) => {
                let sj = reports[j].0.score().unwrap_or(f64::NEG_INFINITY);
                let fewer = r.family.n_params() < reports[j].0.family.n_params();
                if s > sj + 1e-9 || ((s - sj).abs() <= 1e-9 && fewer) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    let Some(i) = best else {
        return Err(Error::AllModelsFailed { tried: PIT_CANDIDATES.len() });
    };
    let (report, u) = &reports[i];
    let ks = report.ks.expect("scored");
    let pit = report.pit.expect("scored");
    Ok(PitSelection {
        chosen: report.fit.expect("scored"),
        ks,
        pit,
        passes: ks.p_value > 0.01 && pit.p_value > 0.01,
        u: u.clone(),
        candidates: reports.into_iter().map(|(r, _)| r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_three_points_against_uniform() {
        let r = ks_test_with(&[0.1, 0.5, 0.9], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 7.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn ks_perfect_quantiles() {
        let n = 2000;
        let spec = DistSpec::student_t(0.0, 1.0, 5.0);
        let data: Vec<f64> = (1..=n).map(|i| spec.quantile(i as f64 / (n + 1) as f64).unwrap()).collect();
        let r = ks_test(&data, &spec).unwrap();
        assert!(r.statistic < 1.0 / n as f64 + 1e-9);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // The two series representations must meet smoothly at the switch.
        let below = kolmogorov_survival(1.18 - 1e-9);
        let above = kolmogorov_survival(1.18 + 1e-9);
        assert!((below - above).abs() < 1e-8);
        // Known value: P(K > 1.36) ≈ 0.0494.
        assert!((kolmogorov_survival(1.36) - 0.049_4).abs() < 2e-4);
    }

    #[test]
    fn uniformity_examples() {
        let base: Vec<f64> = (0..10).map(|k| 0.05 + 0.1 * k as f64).collect();
        let u: Vec<f64> = base.iter().cycle().take(1000).copied().collect();
        let r = pit_uniformity_test(&u, 10).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = pit_uniformity_test(&[0.5; 1000], 10).unwrap();
        assert!(r.p_value < 1e-100);
        assert!(matches!(pit_uniformity_test(&[0.5, 1.0], 10), Err(Error::DomainError(_))));
    }

    #[test]
    fn normal_quantiles_select_normal_like() {
        let n = 1000;
        let z: Vec<f64> = (1..=n)
            .map(|i| DistSpec::standard_normal().quantile(i as f64 / (n + 1) as f64).unwrap())
            .collect();
        let sel = select_pit_family(&z, DEFAULT_PIT_BINS).unwrap();
        let s = sel.chosen.spec;
        let normal_like = match s.family {
            Family::Normal => true,
            Family::StudentT | Family::SkewT => s.d > 30.0,
            Family::Ged | Family::SkewGed => (s.d - 2.0).abs() < 0.2,
            Family::SkewNormal => false,
        };
        assert!(normal_like, "{s:?}");
        for w in sel.u.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(sel.u.iter().all(|v| (PIT_CLAMP..=1.0 - PIT_CLAMP).contains(v)));
    }
}
