//! ARMA mean models, GARCH/EGARCH variance models, the ADF test and rolling
//! one-step forecasts.

mod adf;
mod arma;
pub mod optim;
mod rolling;
pub mod simulate;
mod variance;

use serde::{Deserialize, Serialize};

pub use adf::{adf_lag_order, adf_stationarity, AdfResult, ADF_CRITICAL_5PCT, MIN_ADF_LEN};
pub use arma::{
    ar_ma_root_separation, conditional_residuals, constrain_coefficients, exact_loglik, fit_arma,
    fit_arma_order, fit_arma_warm, forecast_mean, min_root_modulus, unconstrain_coefficients,
    ArmaFit, ArmaSelection, CandidateSummary, GRAD_CHECK_TOL, MAX_ORDER, MIN_ARMA_LEN,
    MIN_ROOT_MODULUS, MIN_ROOT_SEPARATION,
};
pub use rolling::{
    rolling_forecasts, rolling_forecasts_series, ForecastEntry, ForecastTable, RollingConfig,
};
pub use variance::{
    egarch_variances, fit_egarch, fit_garch, fit_variance, fit_variance_warm, garch_variances,
    VarianceFit, VarianceKind, VarianceSelection, E_ABS_Z, MIN_VARIANCE_LEN, VARIANCE_FLOOR,
};

use crate::error::Result;

/// Selected mean model with its variance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaGarchFit {
    pub mean: ArmaFit,
    pub variance: VarianceFit,
    /// The variance model fell back to a constant.
    pub variance_fallback: bool,
}

impl ArmaGarchFit {
    pub fn forecast_next(&self, series: &[f64]) -> f64 {
        self.mean.forecast_next(series)
    }
}

/// Order selection for the mean followed by variance-family selection on
/// its residuals.
pub fn fit_arma_garch(series: &[f64], max_p: usize, max_q: usize) -> Result<ArmaGarchFit> {
    let mean = fit_arma(series, max_p, max_q)?.best;
    let sel = fit_variance(&mean.residuals)?;
    Ok(ArmaGarchFit {
        mean,
        variance: sel.best,
        variance_fallback: sel.fallback,
    })
}
