//! Walk-forward one-step-ahead mean forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arma::{
    conditional_residuals, fit_arma_order, fit_arma_warm, forecast_mean, ArmaFit, CandidateSummary,
};
use super::variance::{fit_variance_warm, VarianceKind, VarianceSelection};
use crate::error::{Error, Result};
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window: usize,
    /// Re-run the order grid every this many windows.
    pub order_refit_every: usize,
    /// Re-estimate coefficients every this many windows.
    pub coef_refit_every: usize,
    pub max_p: usize,
    pub max_q: usize,
    /// Also fit the GARCH/EGARCH variance model.
    pub fit_variance: bool,
    /// Re-estimate the variance model every this many windows (and on every
    /// order refit). It does not enter the mean forecast.
    pub variance_refit_every: usize,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window: 365,
            order_refit_every: 30,
            coef_refit_every: 1,
            max_p: 4,
            max_q: 4,
            fit_variance: true,
            variance_refit_every: 1,
        }
    }
}

/// Forecast of day `date_index` made from the window ending the day before.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry {
    pub date_index: usize,
    pub mu_hat: f64,
    pub p: usize,
    pub q: usize,
    pub variance_kind: Option<VarianceKind>,
    /// A converged model produced this value; otherwise it was carried
    /// forward or taken from the window mean.
    pub converged: bool,
}

/// Forecasts for several series: `rows[k][asset]` is the forecast of day
/// `first_date + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    pub first_date: usize,
    pub rows: Vec<Vec<ForecastEntry>>,
}

impl ForecastTable {
    pub fn mu_hat(&self, date_index: usize) -> Option<Vec<f64>> {
        let k = date_index.checked_sub(self.first_date)?;
        self.rows
            .get(k)
            .map(|row| row.iter().map(|e| e.mu_hat).collect())
    }
}

struct State {
    fit: ArmaFit,
    variance: Option<VarianceSelection>,
}

/// Forecasts `series[t + 1]` for every `t` in `[window − 1, n − 2]`.
pub fn rolling_forecasts_series(series: &[f64], cfg: &RollingConfig) -> Result<Vec<ForecastEntry>> {
    let w = cfg.window;
    let n = series.len();
    if w < super::arma::MIN_ARMA_LEN {
        return Err(Error::InvalidInput(format!(
            "window {w} shorter than {}",
            super::arma::MIN_ARMA_LEN
        )));
    }
    if n <= w {
        return Err(Error::SeriesTooShort {
            needed: w + 1,
            got: n,
        });
    }
    let order_every = cfg.order_refit_every.max(1);
    let coef_every = cfg.coef_refit_every.max(1);
    let var_every = cfg.variance_refit_every.max(1);
    let mut state: Option<State> = None;
    let mut last_good: Option<f64> = None;
    // Candidate coordinates of the latest order grid, reused as starts.
    let mut grid: Vec<CandidateSummary> = Vec::new();
    let mut run_grid = |window: &[f64]| {
        fit_arma_warm(window, cfg.max_p, cfg.max_q, &grid).map(|s| {
            grid = s.candidates;
            s.best
        })
    };
    let mut out = Vec::with_capacity(n - w);

    for (step, end) in (w - 1..n - 1).enumerate() {
        let window = &series[end + 1 - w..=end];
        let full = step % order_every == 0 || state.is_none();
        let refit = full || step % coef_every == 0;
        if refit {
            let fitted = if full {
                run_grid(window)
            } else {
                let prev = &state.as_ref().expect("state present").fit;
                fit_arma_order(window, prev.p, prev.q, Some(&prev.raw_params)).and_then(|f| {
                    if f.converged {
                        Ok(f)
                    } else {
                        run_grid(window)
                    }
                })
            };
            match fitted {
                Ok(fit) => {
                    let previous = state.as_ref().and_then(|s| s.variance.clone());
                    let variance = if cfg.fit_variance && !full && step % var_every != 0 {
                        previous
                    } else if cfg.fit_variance {
                        let prev = state
                            .as_ref()
                            .and_then(|s| s.variance.as_ref())
                            .filter(|_| !full);
                        let wg = prev
                            .and_then(|v| v.garch.as_ref())
                            .map(|f| f.raw_params.as_slice());
                        let we = prev
                            .and_then(|v| v.egarch.as_ref())
                            .map(|f| f.raw_params.as_slice());
                        fit_variance_warm(&fit.residuals, wg, we).ok()
                    } else {
                        None
                    };
                    state = Some(State { fit, variance });
                }
                Err(e) => {
                    log::warn!("window ending {end}: {e}");
                    state = None;
                }
            }
        }

        let entry = match &state {
            Some(s) => {
                let f = &s.fit;
                let resid = if refit {
                    f.residuals.clone()
                } else {
                    conditional_residuals(window, f.delta, &f.phi, &f.theta, f.mean)
                };
                let mu_hat = forecast_mean(f.delta, &f.phi, &f.theta, window, &resid);
                if mu_hat.is_finite() {
                    last_good = Some(mu_hat);
                    ForecastEntry {
                        date_index: end + 1,
                        mu_hat,
                        p: f.p,
                        q: f.q,
                        variance_kind: s.variance.as_ref().map(|v| v.best.kind),
                        converged: true,
                    }
                } else {
                    gap(end + 1, last_good, window)
                }
            }
            None => gap(end + 1, last_good, window),
        };
        out.push(entry);
    }
    Ok(out)
}

fn gap(date_index: usize, last_good: Option<f64>, window: &[f64]) -> ForecastEntry {
    ForecastEntry {
        date_index,
        mu_hat: last_good.unwrap_or_else(|| mean(window)),
        p: 0,
        q: 0,
        variance_kind: None,
        converged: false,
    }
}

/// Runs [`rolling_forecasts_series`] for every series in parallel. All
/// series must have the same length.
pub fn rolling_forecasts(
    series_by_asset: &[Vec<f64>],
    cfg: &RollingConfig,
) -> Result<ForecastTable> {
    let n = series_by_asset.first().map_or(0, Vec::len);
    if series_by_asset.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    let per_asset: Vec<Vec<ForecastEntry>> = series_by_asset
        .par_iter()
        .map(|s| rolling_forecasts_series(s, cfg))
        .collect::<Result<_>>()?;
    let days = n.saturating_sub(cfg.window);
    let rows = (0..days)
        .map(|k| per_asset.iter().map(|a| a[k]).collect())
        .collect();
    Ok(ForecastTable {
        first_date: cfg.window,
        rows,
    })
}
