//! Augmented Dickey–Fuller unit-root test with an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

/// 5% critical value of the intercept-only test.
pub const ADF_CRITICAL_5PCT: f64 = -2.86;
/// Shortest series accepted.
pub const MIN_ADF_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags: usize,
    pub n_obs: usize,
    pub reject_unit_root: bool,
}

/// Lag order `floor(12 (n / 100)^{1/4})`.
pub fn adf_lag_order(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Regresses `Δy_t` on `1, y_{t−1}, Δy_{t−1}, …, Δy_{t−k}` and returns the
/// t-statistic of the `y_{t−1}` coefficient.
pub fn adf_stationarity(series: &[f64]) -> Result<AdfResult> {
    let n = series.len();
    if n < MIN_ADF_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_ADF_LEN,
            got: n,
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "series contains non-finite values".into(),
        ));
    }
    if series.iter().all(|&x| x == series[0]) {
        return Err(Error::ZeroVariance);
    }
    let k = adf_lag_order(n);
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // Row for dy[t] uses y[t] as the lagged level and dy[t-1..t-k].
    let rows = dy.len() - k;
    let x = DMatrix::from_fn(rows, k + 2, |i, j| {
        let t = i + k;
        match j {
            0 => 1.0,
            1 => series[t],
            _ => dy[t - (j - 1)],
        }
    });
    let y = DVector::from_fn(rows, |i, _| dy[i + k]);
    let fit = ols(&x, &y).ok_or_else(|| Error::FitFailed("ADF regression is singular".into()))?;
    if !(fit.se[1] > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let statistic = fit.beta[1] / fit.se[1];
    Ok(AdfResult {
        statistic,
        lags: k,
        n_obs: rows,
        reject_unit_root: statistic < ADF_CRITICAL_5PCT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsmodel::simulate::standard_normals;

    #[test]
    fn lag_rule() {
        assert_eq!(adf_lag_order(100), 12);
        assert_eq!(adf_lag_order(1000), 21);
        assert_eq!(adf_lag_order(30), 8);
    }

    #[test]
    fn white_noise_rejects() {
        let rejects = (0..200)
            .filter(|&s| {
                adf_stationarity(&standard_normals(s, 1000))
                    .unwrap()
                    .reject_unit_root
            })
            .count();
        assert!(rejects >= 195, "{rejects}");
    }

    #[test]
    fn random_walk_does_not_reject() {
        let kept = (0..200)
            .filter(|&s| {
                let walk: Vec<f64> = standard_normals(1000 + s, 1000)
                    .iter()
                    .scan(0.0, |acc, z| {
                        *acc += z;
                        Some(*acc)
                    })
                    .collect();
                !adf_stationarity(&walk).unwrap().reject_unit_root
            })
            .count();
        assert!(kept >= 180, "{kept}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            adf_stationarity(&[1.0; 50]),
            Err(Error::ZeroVariance)
        ));
        assert!(matches!(
            adf_stationarity(&[1.0; 10]),
            Err(Error::SeriesTooShort { .. })
        ));
    }
}
