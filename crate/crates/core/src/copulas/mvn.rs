//! Multivariate normal and Student t orthant probabilities `P(X ≤ b)`.
//!
//! Dimensions above two use Genz's separation-of-variables integrand on a
//! fixed randomly shifted Richtmyer lattice, so results are deterministic.

use statrs::distribution::{ContinuousCDF, Gamma};

use crate::numeric::quad::{integrate, integrate_upper_tail};
use crate::numeric::special::{bvn_cdf, norm_cdf, norm_quantile_fast};
use statrs::function::gamma::ln_gamma;

pub(crate) const QMC_POINTS: usize = 2048;

const PRIMES: [f64; 24] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0, 59.0, 61.0, 67.0,
    71.0, 73.0, 79.0, 83.0, 89.0,
];
/// Fixed pseudo-random shifts, one per lattice coordinate.
const SHIFTS: [f64; 24] = [
    0.718_281_828, 0.436_563_657, 0.154_845_485, 0.873_127_313, 0.591_409_142, 0.309_690_970, 0.027_972_799,
    0.746_254_627, 0.464_536_456, 0.182_818_284, 0.901_100_112, 0.619_381_941, 0.337_663_769, 0.055_945_598,
    0.774_227_426, 0.492_509_255, 0.210_791_083, 0.929_072_911, 0.647_354_740, 0.365_636_568, 0.083_918_397,
    0.802_200_225, 0.520_482_054, 0.238_763_882,
];

/// Largest dimension supported by the lattice (one coordinate is reserved for
/// the t mixing variable).
pub(crate) const MAX_QMC_DIM: usize = PRIMES.len();

#[inline]
fn lattice(k: usize, j: usize) -> f64 {
    let x = ((k as f64 + 1.0) * PRIMES[j].sqrt() + SHIFTS[j]).fract();
    // baker's transform periodizes the integrand
    1.0 - (2.0 * x - 1.0).abs()
}

/// Scale factors `√(W/ν)`, `W ~ χ²_ν`, at the lattice points of coordinate `j`.
pub(crate) fn t_mixing_table(nu: f64, j: usize) -> Vec<f64> {
    let chi = Gamma::new(0.5 * nu, 0.5).expect("valid chi-square");
    (0..QMC_POINTS)
        .map(|k| {
            let w = lattice(k, j).clamp(1e-12, 1.0 - 1e-12);
            (chi.inverse_cdf(w) / nu).sqrt()
        })
        .collect()
}

/// `P(X ≤ b)` for `X ~ N(0, LLᵀ)` (`scales = None`) or the t law with
/// mixing table `scales`.
pub(crate) fn orthant_qmc(l: &[Vec<f64>], b: &[f64], scales: Option<&[f64]>) -> f64 {
    let d = l.len();
    let mut y = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..QMC_POINTS {
        let s = scales.map_or(1.0, |t| t[k]);
        let mut e = norm_cdf(b[0] * s / l[0][0]);
        let mut f = e;
        for i in 1..d {
            if f == 0.0 {
                break;
            }
            let w = lattice(k, i - 1);
            y[i - 1] = norm_quantile_fast((w * e).clamp(1e-300, 1.0 - 1e-16));
            let mut acc = 0.0;
            for j in 0..i {
                acc += l[i][j] * y[j];
            }
            e = norm_cdf((b[i] * s - acc) / l[i][i]);
            f *= e;
        }
        total += f;
    }
    total / QMC_POINTS as f64
}

/// Bivariate t orthant probability by integrating the normal one over the
/// mixing variable.
pub(crate) fn bvt_cdf(b1: f64, b2: f64, rho: f64, nu: f64) -> f64 {
    let c = (0.5 * nu).ln() * (0.5 * nu) + std::f64::consts::LN_2 - ln_gamma(0.5 * nu);
    // density of S = √(W/ν)
    let dens = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        (c + (nu - 1.0) * s.ln() - 0.5 * nu * s * s).exp()
    };
    let g = |s: f64| dens(s) * bvn_cdf(b1 * s, b2 * s, rho);
    (integrate(g, 0.0, 1.0, 1e-12, 1e-10) + integrate_upper_tail(g, 1.0, 1e-12, 1e-10)).clamp(0.0, 1.0)
}
