//! Sample moments, rank statistics and covariance estimation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clearly labeled sample moments of a return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_dev: f64,
    /// Standardized third central moment, `m3 / m2^{3/2}`.
    pub skewness: f64,
    /// Standardized fourth central moment minus 3, `m4 / m2² − 3`.
    pub excess_kurtosis: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the n − 1 denominator.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn summary_stats(x: &[f64]) -> Result<SummaryStats> {
    if x.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sd = (m2 / (n - 1.0)).sqrt();
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 1e-300) || sd <= 0.0 || m2 <= f64::EPSILON * f64::EPSILON * m * m {
        return Err(Error::DegenerateSeries(
            "zero variance: skewness and kurtosis are undefined".into(),
        ));
    }
    Ok(SummaryStats {
        mean: m,
        std_dev: sd,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm), handling ties.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let mut x_ties = 0u64;
    let mut joint_ties = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let t = (j - i) as u64;
        x_ties += t * (t - 1) / 2;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && y[idx[l]] == y[idx[k]] {
                l += 1;
            }
            let u = (l - k) as u64;
            joint_ties += u * (u - 1) / 2;
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut y_ties = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        y_ties += t * (t - 1) / 2;
        i = j;
    }

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let num = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    let den = ((n0 - x_ties) as f64 * (n0 - y_ties) as f64).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Ranks scaled by 1/(n+1); ties receive their average rank.
pub fn pseudo_observations(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            out[k] = avg / (n as f64 + 1.0);
        }
        i = j;
    }
    out
}

/// Column-wise pseudo-observations of a row-major `rows × cols` matrix.
pub fn pseudo_observations_matrix(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if data.is_empty() {
        return Vec::new();
    }
    let cols = data[0].len();
    let mut out = vec![vec![0.0; cols]; data.len()];
    for c in 0..cols {
        let col: Vec<f64> = data.iter().map(|r| r[c]).collect();
        for (r, v) in pseudo_observations(&col).into_iter().enumerate() {
            out[r][c] = v;
        }
    }
    out
}

pub fn column(data: &[Vec<f64>], c: usize) -> Vec<f64> {
    data.iter().map(|r| r[c]).collect()
}

/// Matrix of pairwise Kendall's tau between the columns of `data`.
pub fn kendall_matrix(data: &[Vec<f64>]) -> DMatrix<f64> {
    let d = data.first().map_or(0, |r| r.len());
    let cols: Vec<Vec<f64>> = (0..d).map(|c| column(data, c)).collect();
    let mut m = DMatrix::identity(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let t = kendall_tau(&cols[i], &cols[j]);
            m[(i, j)] = t;
            m[(j, i)] = t;
        }
    }
    m
}

/// Sample mean vector and covariance (n − 1) of row vectors.
pub fn mean_and_covariance<'a, I>(rows: I, dim: usize) -> (Vec<f64>, DMatrix<f64>, usize)
where
    I: IntoIterator<Item = &'a [f64]> + Clone,
{
    let mut count = 0usize;
    let mut mu = vec![0.0; dim];
    for r in rows.clone() {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
        count += 1;
    }
    for m in &mut mu {
        *m /= count as f64;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for r in rows {
        for i in 0..dim {
            let di = r[i] - mu[i];
            for j in i..dim {
                cov[(i, j)] += di * (r[j] - mu[j]);
            }
        }
    }
    let denom = (count as f64 - 1.0).max(1.0);
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mu, cov, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0.0_f64, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let sx = (x[i] - x[j]).signum() * if x[i] == x[j] { 0.0 } else { 1.0 };
                let sy = (y[i] - y[j]).signum() * if y[i] == y[j] { 0.0 } else { 1.0 };
                if sx == 0.0 && sy == 0.0 {
                    continue;
                }
                if sx == 0.0 {
                    tx += 1.0;
                } else if sy == 0.0 {
                    ty += 1.0;
                } else if sx == sy {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
    }

    #[test]
    fn kendall_matches_brute_force_with_ties() {
        let x = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 5.0, 0.5, 2.0, 3.0];
        let y = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 4.0, 0.0, 1.0, 3.0];
        assert!((kendall_tau(&x, &y) - brute_tau_b(&x, &y)).abs() < 1e-14);
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((kendall_tau(&x, &z) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_point_series_is_symmetric() {
        let s = summary_stats(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.skewness, 0.0);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(summary_stats(&[3.0; 10]), Err(Error::DegenerateSeries(_))));
        assert!(matches!(summary_stats(&[1.0, 2.0, 3.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn pseudo_observations_average_ties() {
        let u = pseudo_observations(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(u, vec![3.5 / 5.0, 1.0 / 5.0, 3.5 / 5.0, 2.0 / 5.0]);
    }
}
