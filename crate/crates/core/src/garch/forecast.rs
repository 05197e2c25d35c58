//! Multi-step forecasts and forward simulation from a fitted state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::filter::{Coefs, Lags};
use super::{FittedMarginal, ModelSpec, Presample, Variant, MAX_ORDER};
use crate::distributions::DistSpec;
use crate::error::{Error, Result};
use crate::rng;

/// The last `MAX_ORDER` returns, innovations and conditional variances,
/// most recent first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionState {
    pub r: [f64; MAX_ORDER],
    pub e: [f64; MAX_ORDER],
    pub h: [f64; MAX_ORDER],
}

impl RecursionState {
    pub fn presample(pre: &Presample) -> Self {
        RecursionState { r: [pre.mean; MAX_ORDER], e: [0.0; MAX_ORDER], h: [pre.variance; MAX_ORDER] }
    }

    fn lags(&self) -> Lags<f64> {
        Lags::from_arrays(self.r, self.e, self.h, self.h.map(f64::ln))
    }

    pub fn push(&mut self, r: f64, e: f64, h: f64) {
        for j in (1..MAX_ORDER).rev() {
            self.r[j] = self.r[j - 1];
            self.e[j] = self.e[j - 1];
            self.h[j] = self.h[j - 1];
        }
        self.r[0] = r;
        self.e[0] = e;
        self.h[0] = h;
    }
}

/// Conditional mean and standard deviation paths for `T+1..T+h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Evaluates one-step conditional moments and draws innovations for a fixed model.
#[derive(Debug, Clone)]
pub struct Propagator {
    coefs: Coefs<f64>,
    innovation: DistSpec,
    prob_non_positive: f64,
}

impl Propagator {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        Ok(Propagator {
            coefs: Coefs::from_spec(model),
            innovation: model.innovation.dist_spec(),
            prob_non_positive: model.innovation.prob_non_positive(),
        })
    }

    /// `(a_t, b_t²)` given the lags.
    pub fn moments(&self, st: &RecursionState) -> (f64, f64) {
        let lags = st.lags();
        (self.coefs.cond_mean(&lags), self.coefs.cond_variance(&lags).0)
    }

    /// Standardized innovation for a uniform `u` (inverse CDF).
    pub fn innovation_quantile(&self, u: f64) -> Result<f64> {
        self.innovation.quantile(u)
    }

    pub fn innovation(&self) -> &DistSpec {
        &self.innovation
    }

    /// Advances the state with innovation `z`, returning the realized return.
    pub fn step(&self, st: &mut RecursionState, z: f64) -> f64 {
        let (a, h) = self.moments(st);
        let e = h.sqrt() * z;
        st.push(a + e, e, h);
        a + e
    }

    /// Forecasts with future innovations at their expectations.
    pub fn forecast(&self, st: &RecursionState, horizon: usize) -> Forecast {
        let c = &self.coefs;
        let mut lags = st.lags();
        let mut known = [true; MAX_ORDER];
        let mut out = Forecast { mean: Vec::with_capacity(horizon), sd: Vec::with_capacity(horizon) };
        for _ in 0..horizon {
            let a = c.cond_mean(&lags);
            let (h, ln_h) = match c.variant {
                Variant::Garch | Variant::Igarch | Variant::Gjr => {
                    let mut h = c.omega;
                    for j in 0..c.arch.len() {
                        let gamma = if c.variant == Variant::Gjr { c.asym[j] } else { 0.0 };
                        h += if known[j] {
                            let e2 = lags.e(j) * lags.e(j);
                            (c.arch[j] + if lags.e(j) <= 0.0 { gamma } else { 0.0 }) * e2
                        } else {
                            (c.arch[j] + gamma * self.prob_non_positive) * lags.h(j)
                        };
                    }
                    for (j, psi) in c.garch.iter().enumerate() {
                        h += psi * lags.h(j);
                    }
                    (h, h.ln())
                }
                Variant::Egarch => {
                    let mut ln_h = c.omega;
                    for j in 0..c.arch.len() {
                        if known[j] {
                            let z = lags.e(j) / lags.h(j).sqrt();
                            ln_h += c.arch[j] * z + c.asym[j] * (z.abs() - c.abs_mean);
                        }
                    }
                    for (j, psi) in c.garch.iter().enumerate() {
                        ln_h += psi * lags.ln_h(j);
                    }
                    (ln_h.exp(), ln_h)
                }
            };
            out.mean.push(a);
            out.sd.push(h.sqrt());
            lags.push(a, 0.0, h, ln_h);
            known.rotate_right(1);
            known[0] = false;
        }
        out
    }
}

impl FittedMarginal {
    /// Lag state after the last observation.
    pub fn terminal_state(&self) -> RecursionState {
        let mut st = RecursionState::presample(&self.presample);
        let t = self.returns.len();
        for i in t.saturating_sub(MAX_ORDER)..t {
            let b = self.cond_sd[i];
            st.push(self.returns[i], self.returns[i] - self.cond_mean[i], b * b);
        }
        st
    }

    pub fn forecast(&self, horizon: usize) -> Result<Forecast> {
        if horizon == 0 {
            return Err(Error::InvalidParameters("forecast horizon must be at least 1".into()));
        }
        Ok(Propagator::new(&self.model)?.forecast(&self.terminal_state(), horizon))
    }
}

impl ModelSpec {
    /// Long-run variance used to start simulated paths.
    pub fn stationary_variance(&self) -> f64 {
        let g = &self.garch;
        let kappa = self.innovation.prob_non_positive();
        let a: f64 = g.arch.iter().sum();
        let c: f64 = g.asymmetry.iter().sum();
        let psi: f64 = g.garch.iter().sum();
        match g.variant {
            Variant::Garch => g.omega / (1.0 - a - psi),
            Variant::Gjr => g.omega / (1.0 - a - kappa * c - psi).max(1e-3),
            Variant::Egarch => (g.omega / (1.0 - psi)).exp(),
            Variant::Igarch => g.omega * 100.0,
        }
    }

    /// Simulates `n` returns after discarding `burn_in` steps.
    pub fn simulate(&self, n: usize, burn_in: usize, seed: u64) -> Result<Vec<f64>> {
        let prop = Propagator::new(self)?;
        let mut st = RecursionState::presample(&Presample { mean: self.arma.mean, variance: self.stationary_variance() });
        let mut r = rng::seeded(seed);
        let spec = *prop.innovation();
        let mut out = Vec::with_capacity(n);
        for i in 0..n + burn_in {
            let z = spec.a + spec.b * spec.std_draw(&mut r);
            let x = prop.step(&mut st, z);
            if i >= burn_in {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Draws from the innovation law with an external generator.
    pub fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let spec = self.innovation.dist_spec();
        spec.a + spec.b * spec.std_draw(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ArmaSpec, GarchSpec, InnovationSpec};
    use super::*;

    fn model(variant: Variant, omega: f64, alpha: f64, psi: f64) -> ModelSpec {
        ModelSpec {
            arma: ArmaSpec::constant(0.0),
            garch: GarchSpec {
                variant,
                q: 1,
                p: 1,
                omega,
                arch: vec![alpha],
                asymmetry: if variant.has_asymmetry() { vec![0.0] } else { vec![] },
                garch: vec![psi],
            },
            innovation: InnovationSpec::normal(),
        }
    }

    #[test]
    fn garch_sample_variance_near_unconditional() {
        let m = model(Variant::Garch, 0.1, 0.1, 0.8);
        let r = m.simulate(200_000, 1000, 11).unwrap();
        let v = crate::stats::variance(&r);
        assert!((0.9..=1.1).contains(&v), "{v}");
    }

    #[test]
    fn garch_forecast_converges_to_unconditional() {
        let m = model(Variant::Garch, 0.1, 0.1, 0.8);
        let p = Propagator::new(&m).unwrap();
        let mut st = RecursionState::presample(&Presample { mean: 0.0, variance: 4.0 });
        st.push(2.0, 2.0, 4.0);
        let f = p.forecast(&st, 400);
        let last = f.sd.last().unwrap().powi(2);
        assert!((last - 1.0).abs() < 1e-12);
    }

    #[test]
    fn igarch_forecast_grows_linearly() {
        let m = model(Variant::Igarch, 0.05, 0.15, 0.85);
        let p = Propagator::new(&m).unwrap();
        let mut st = RecursionState::presample(&Presample { mean: 0.0, variance: 1.0 });
        st.push(0.3, 0.3, 1.2);
        let f = p.forecast(&st, 50);
        let h1 = f.sd[0].powi(2);
        for (k, s) in f.sd.iter().enumerate() {
            assert!((s * s - (h1 + k as f64 * 0.05)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_mean_forecast() {
        let mut m = model(Variant::Egarch, -0.1, 0.05, 0.9);
        m.garch.asymmetry = vec![0.1];
        m.arma.mean = 0.0007;
        let p = Propagator::new(&m).unwrap();
        let f = p.forecast(&RecursionState::presample(&Presample { mean: 0.0, variance: 1.0 }), 10);
        assert!(f.mean.iter().all(|&a| a == 0.0007));
        assert!(f.sd.iter().all(|&s| s > 0.0));
    }
}
