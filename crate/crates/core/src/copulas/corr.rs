//! Correlation-matrix helpers: Kendall-tau starts, PD projection and an
//! unconstrained parameterization through canonical partial correlations.

use nalgebra::{DMatrix, SymmetricEigen};

const MIN_EIGEN: f64 = 1e-6;

/// Projects a symmetric matrix onto the correlation matrices with smallest
/// eigenvalue at least `1e-6`; returns whether a change was needed.
pub fn nearest_correlation(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let d = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    if sym.clone().cholesky().is_some() {
        let eig = SymmetricEigen::new(sym.clone());
        if eig.eigenvalues.min() >= MIN_EIGEN {
            return (sym, false);
        }
    }
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        *v = v.max(MIN_EIGEN);
    }
    let a = eig.recompose();
    let mut out = DMatrix::identity(d, d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                out[(i, j)] = a[(i, j)] / (a[(i, i)] * a[(j, j)]).sqrt();
            }
        }
    }
    (out, true)
}

/// Elliptical correlation implied by a Kendall-tau matrix, `sin(πτ/2)`,
/// projected to PD when needed.
pub fn correlation_from_tau(tau: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let r = tau.map(|t| (std::f64::consts::FRAC_PI_2 * t).sin());
    nearest_correlation(&r)
}

/// Lower Cholesky factor of a correlation matrix stored row-wise as
/// `l[i][0..=i]`, built from unconstrained parameters (one per pair).
pub(crate) fn cholesky_from_params(x: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut l = vec![Vec::new(); dim];
    let mut k = 0;
    l[0].push(1.0);
    for i in 1..dim {
        let mut row = Vec::with_capacity(i + 1);
        let mut rem = 1.0f64;
        for _ in 0..i {
            let z = x[k].tanh();
            k += 1;
            let v = z * rem.max(0.0).sqrt();
            rem -= v * v;
            row.push(v);
        }
        row.push(rem.max(1e-300).sqrt());
        l[i] = row;
    }
    l
}

/// Inverse of [`cholesky_from_params`].
pub(crate) fn params_from_correlation(r: &DMatrix<f64>) -> Option<Vec<f64>> {
    let d = r.nrows();
    let l = r.clone().cholesky()?.l();
    let mut x = Vec::with_capacity(d * (d - 1) / 2);
    for i in 1..d {
        let mut rem = 1.0f64;
        for j in 0..i {
            let z = (l[(i, j)] / rem.max(1e-300).sqrt()).clamp(-0.999_999_999, 0.999_999_999);
            x.push(z.atanh());
            rem -= l[(i, j)] * l[(i, j)];
        }
    }
    Some(x)
}

pub(crate) fn correlation_from_cholesky(l: &[Vec<f64>]) -> DMatrix<f64> {
    let d = l.len();
    let mut r = DMatrix::identity(d, d);
    for i in 0..d {
        for j in 0..i {
            let v: f64 = (0..=j).map(|k| l[i][k] * l[j][k]).sum();
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Row-wise lower Cholesky factor of a PD matrix.
pub(crate) fn cholesky_rows(r: &DMatrix<f64>) -> Option<Vec<Vec<f64>>> {
    let l = r.clone().cholesky()?.l();
    Some((0..r.nrows()).map(|i| (0..=i).map(|j| l[(i, j)]).collect()).collect())
}

/// `|L⁻¹ x|²` by forward substitution; `y` is scratch of length `dim`.
#[inline]
pub(crate) fn mahalanobis(l: &[Vec<f64>], x: &[f64], y: &mut [f64]) -> f64 {
    let mut q = 0.0;
    for i in 0..l.len() {
        let row = &l[i];
        let mut s = x[i];
        for j in 0..i {
            s -= row[j] * y[j];
        }
        y[i] = s / row[i];
        q += y[i] * y[i];
    }
    q
}

pub(crate) fn ln_det_from_cholesky(l: &[Vec<f64>]) -> f64 {
    2.0 * l.iter().enumerate().map(|(i, row)| row[i].ln()).sum::<f64>()
}
