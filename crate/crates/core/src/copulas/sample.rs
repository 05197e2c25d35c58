//! Exact samplers: elliptical by construction, archimedean by Marshall–Olkin
//! frailties (gamma for Clayton, positive stable for Gumbel).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;

use super::corr::cholesky_rows;
use super::{CopulaFamily, CopulaModel};
use crate::error::Result;
use crate::numeric::special::{norm_cdf, student_t_cdf};
use crate::rng;

/// Keeps draws strictly inside the unit interval.
const EDGE: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct CopulaSampler {
    kind: Kind,
    dim: usize,
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian(Vec<Vec<f64>>),
    T(Vec<Vec<f64>>, ChiSquared<f64>, f64),
    Clayton(Gamma<f64>, f64),
    Gumbel(f64),
}

/// Positive stable variable with Laplace transform `exp(-s^α)` (Kanter).
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 - 1e-12 {
        return 1.0;
    }
    let theta: f64 = PI * rng.random::<f64>();
    let e: f64 = rng.sample(Exp1);
    let a = (alpha * theta).sin().powf(alpha / (1.0 - alpha)) * ((1.0 - alpha) * theta).sin()
        / theta.sin().powf(1.0 / (1.0 - alpha));
    (a / e).powf((1.0 - alpha) / alpha)
}

impl CopulaSampler {
    pub fn new(m: &CopulaModel) -> Result<Self> {
        m.validate()?;
        let kind = match m.family {
            CopulaFamily::Gaussian => Kind::Gaussian(cholesky_rows(&m.correlation()).expect("validated PD")),
            CopulaFamily::T => {
                let nu = m.nu.expect("validated");
                Kind::T(cholesky_rows(&m.correlation()).expect("validated PD"), ChiSquared::new(nu).expect("nu > 2"), nu)
            }
            CopulaFamily::Clayton => {
                let d = m.params[0];
                Kind::Clayton(Gamma::new(1.0 / d, 1.0).expect("delta > 0"), d)
            }
            CopulaFamily::Gumbel => Kind::Gumbel(m.params[0]),
        };
        Ok(CopulaSampler { kind, dim: m.dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            Kind::Gaussian(l) | Kind::T(l, ..) => {
                let eps: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                let scale = match &self.kind {
                    Kind::T(_, chi, nu) => (chi.sample(rng) / nu).sqrt(),
                    _ => 1.0,
                };
                for i in 0..self.dim {
                    let z: f64 = (0..=i).map(|j| l[i][j] * eps[j]).sum();
                    out[i] = match &self.kind {
                        Kind::T(.., nu) => student_t_cdf(z / scale, *nu),
                        _ => norm_cdf(z),
                    };
                }
            }
            Kind::Clayton(gamma, delta) => {
                let v = gamma.sample(rng);
                for o in out.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    *o = (-(e / v).ln_1p() / delta).exp();
                }
            }
            Kind::Gumbel(delta) => {
                let alpha = 1.0 / delta;
                let v = positive_stable(alpha, rng);
                for o in out.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    *o = (-(e / v).powf(alpha)).exp();
                }
            }
        }
        for o in out.iter_mut() {
            *o = o.clamp(EDGE, 1.0 - EDGE);
        }
    }
}

/// `n` draws, in chunks of 1024 rows with chunk `c` taken from substream `c`
/// of `seed`; the output does not depend on the thread count.
pub fn sample_copula(model: &CopulaModel, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let s = CopulaSampler::new(model)?;
    const CHUNK: usize = 1024;
    let chunks: Vec<Vec<Vec<f64>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng::substream(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let mut row = vec![0.0; s.dim];
                    s.draw(&mut r, &mut row);
                    row
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}
