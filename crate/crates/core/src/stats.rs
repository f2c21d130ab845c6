//! Small descriptive-statistics helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Percentile of already sorted data using linear interpolation between
/// order statistics (`h = (n - 1) * q`).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile of unsorted data, see [`percentile_sorted`].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Population variance (`n` denominator).
pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64
}

/// Sample covariance matrix (row-major, `n - 1` denominator) of the columns
/// of `rows`, where each row is one observation.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut means = vec![0.0; k];
    for r in rows {
        for (m, x) in means.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; k]; k];
    for r in rows {
        for i in 0..k {
            let di = r[i] - means[i];
            for j in i..k {
                cov[i][j] += di * (r[j] - means[j]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..k {
        for j in i..k {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Ordinary least squares result.
#[derive(Debug, Clone, PartialEq)]
pub struct Ols {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Residual variance with `n − k` denominator.
    pub sigma2: f64,
    /// Standard errors of `beta`.
    pub se: DVector<f64>,
}

/// Least squares of `y` on the columns of `x` via the normal equations.
/// Returns `None` when `x'x` is not positive definite or `n ≤ k`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Ols> {
    let (n, k) = x.shape();
    if n <= k || y.len() != n {
        return None;
    }
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky()?;
    let beta = chol.solve(&(x.transpose() * y));
    let residuals = y - x * &beta;
    let sigma2 = residuals.norm_squared() / (n - k) as f64;
    let inv = chol.inverse();
    let se = DVector::from_fn(k, |i, _| (sigma2 * inv[(i, i)]).max(0.0).sqrt());
    beta.iter().all(|b| b.is_finite()).then_some(Ols {
        beta,
        residuals,
        sigma2,
        se,
    })
}
