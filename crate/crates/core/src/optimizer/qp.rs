//! Primal active-set method for small dense box-constrained QPs
//! `min ½xᵀQx + cᵀx  s.t.  Ax = b, lo ≤ x ≤ hi`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Free,
    Lower,
    Upper,
}

pub(crate) struct Qp<'a> {
    pub q: &'a DMatrix<f64>,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Largest violation of stationarity, complementarity sign or feasibility.
    pub kkt_residual: f64,
}

impl Qp<'_> {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| self.c[i] + (0..n).map(|j| self.q[(i, j)] * x[j]).sum::<f64>()).collect()
    }

    /// Step `p` on the free variables and equality multipliers `λ` from the
    /// KKT system `[Q_FF A_Fᵀ; A_F 0][p; λ] = [−g_F; 0]`.
    fn kkt_step(&self, free: &[usize], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nf, m) = (free.len(), self.a.len());
        let mut k = DMatrix::zeros(nf + m, nf + m);
        let mut rhs = DVector::zeros(nf + m);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                k[(r, s)] = self.q[(i, j)];
            }
            for (e, row) in self.a.iter().enumerate() {
                k[(r, nf + e)] = row[i];
                k[(nf + e, r)] = row[i];
            }
            rhs[r] = -g[i];
        }
        let scale = k.amax().max(1e-300);
        let sol = k
            .svd(true, true)
            .solve(&rhs, 1e-13 * scale)
            .unwrap_or_else(|_| DVector::zeros(nf + m));
        let mut p = vec![0.0; self.c.len()];
        for (r, &i) in free.iter().enumerate() {
            p[i] = sol[r];
        }
        (p, (0..m).map(|e| sol[nf + e]).collect())
    }

    fn reduced(&self, g: &[f64], lambda: &[f64]) -> Vec<f64> {
        (0..g.len()).map(|i| g[i] + self.a.iter().zip(lambda).map(|(row, l)| row[i] * l).sum::<f64>()).collect()
    }

    /// Solves from a feasible `x0`.
    pub fn solve(&self, x0: &[f64]) -> Result<QpSolution> {
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut state = vec![State::Free; n];
        let gscale = 1.0 + self.q.amax() + self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * gscale;
        for it in 0..MAX_ITER {
            let g = self.gradient(&x);
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == State::Free).collect();
            let (p, lambda) = self.kkt_step(&free, &g);
            let pnorm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if pnorm <= 1e-13 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                let r = self.reduced(&g, &lambda);
                let worst = (0..n)
                    .filter_map(|i| match state[i] {
                        State::Lower if r[i] < -tol => Some((i, -r[i])),
                        State::Upper if r[i] > tol => Some((i, r[i])),
                        _ => None,
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    Some((i, _)) => state[i] = State::Free,
                    None => {
                        let kkt_residual = self.residual(&x, &r, &state);
                        return Ok(QpSolution { x, iterations: it + 1, kkt_residual });
                    }
                }
                continue;
            }
            let mut alpha = 1.0;
            let mut block = None;
            for &i in &free {
                let a = if p[i] < 0.0 {
                    (self.lo[i] - x[i]) / p[i]
                } else if p[i] > 0.0 {
                    (self.hi[i] - x[i]) / p[i]
                } else {
                    continue;
                };
                if a < alpha {
                    alpha = a.max(0.0);
                    block = Some((i, p[i] < 0.0));
                }
            }
            for &i in &free {
                x[i] += alpha * p[i];
            }
            if let Some((i, lower)) = block {
                x[i] = if lower { self.lo[i] } else { self.hi[i] };
                state[i] = if lower { State::Lower } else { State::Upper };
            }
        }
        Err(Error::FitDiverged {
            reason: "active-set QP did not terminate".into(),
            best_loglik: f64::NAN,
            best_params: x,
        })
    }

    fn residual(&self, x: &[f64], r: &[f64], state: &[State]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..x.len() {
            let v = match state[i] {
                State::Free => r[i].abs(),
                State::Lower => (-r[i]).max(0.0),
                State::Upper => r[i].max(0.0),
            };
            worst = worst.max(v).max((self.lo[i] - x[i]).max(0.0)).max((x[i] - self.hi[i]).max(0.0));
        }
        for (row, b) in self.a.iter().zip(&self.b) {
            let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max((ax - b).abs());
        }
        worst
    }
}
