//! GARCH(1,1) and EGARCH(1,1) conditional-variance models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arma::GRAD_CHECK_TOL;
use super::optim::{minimize, BfgsOptions, BfgsResult};
use crate::error::{Error, Result};

/// `E|Z|` for a standard normal `Z`.
pub const E_ABS_Z: f64 = 0.797_884_560_802_865_4;
/// Floor on conditional variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Shortest residual series accepted.
pub const MIN_VARIANCE_LEN: usize = 50;
const PERSISTENCE_BOUND: f64 = 1.0 - 1e-6;
const RESTART_SEED: u64 = 0x5eed_6a7c;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VarianceKind {
    Garch,
    Egarch,
    /// Both dynamic models failed; the sample variance is used.
    Constant,
}

impl std::fmt::Display for VarianceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Garch => "GARCH",
            Self::Egarch => "EGARCH",
            Self::Constant => "CONSTANT",
        })
    }
}

/// A fitted variance model. For GARCH `theta_g` and `lambda_g` are zero;
/// for EGARCH `b` is fixed at 1 as the scale of `g(Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFit {
    pub kind: VarianceKind,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub theta_g: f64,
    pub lambda_g: f64,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub grad_max: f64,
    /// Variance used for the first observation.
    pub initial_variance: f64,
    /// In-sample conditional variances.
    pub variances: Vec<f64>,
    /// Optimizer coordinates at the optimum (standardized data).
    pub raw_params: Vec<f64>,
}

impl VarianceFit {
    pub fn n_params(&self) -> usize {
        match self.kind {
            VarianceKind::Garch => 3,
            VarianceKind::Egarch => 4,
            VarianceKind::Constant => 1,
        }
    }

    /// One-step-ahead conditional variance after the sample.
    pub fn next_variance(&self, residuals: &[f64]) -> f64 {
        let (Some(&e), Some(&s2)) = (residuals.last(), self.variances.last()) else {
            return self.initial_variance;
        };
        match self.kind {
            VarianceKind::Garch => (self.omega + self.a * e * e + self.b * s2).max(VARIANCE_FLOOR),
            VarianceKind::Egarch => {
                let z = e / s2.sqrt();
                egarch_step(self.omega, self.a, self.theta_g, self.lambda_g, s2.ln(), z)
                    .exp()
                    .max(VARIANCE_FLOOR)
            }
            VarianceKind::Constant => self.initial_variance,
        }
    }
}

fn gaussian_loglik(eps: &[f64], variances: &[f64]) -> f64 {
    eps.iter()
        .zip(variances)
        .map(|(e, s2)| -0.5 * (LN_2PI + s2.ln() + e * e / s2))
        .sum()
}

/// `σ²_t = ω + a ε²_{t−1} + b σ²_{t−1}` with `σ²_0 = s0`.
pub fn garch_variances(omega: f64, a: f64, b: f64, eps: &[f64], s0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(eps.len());
    let mut s2 = s0.max(VARIANCE_FLOOR);
    for t in 0..eps.len() {
        if t > 0 {
            let prev = eps[t - 1];
            s2 = (omega + a * prev * prev + b * s2).max(VARIANCE_FLOOR);
        }
        out.push(s2);
    }
    out
}

fn egarch_step(omega: f64, a: f64, theta: f64, lambda: f64, log_prev: f64, z: f64) -> f64 {
    (omega + theta * z + lambda * (z.abs() - E_ABS_Z) + a * log_prev)
        .clamp(VARIANCE_FLOOR.ln(), 690.0)
}

/// `log σ²_t = ω + θ Z_{t−1} + λ(|Z_{t−1}| − E|Z|) + a log σ²_{t−1}` with
/// `σ²_0 = s0`.
pub fn egarch_variances(
    omega: f64,
    a: f64,
    theta: f64,
    lambda: f64,
    eps: &[f64],
    s0: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(eps.len());
    let mut ls2 = s0.max(VARIANCE_FLOOR).ln();
    for t in 0..eps.len() {
        if t > 0 {
            let prev_s2 = out[t - 1];
            let z = eps[t - 1] / f64::sqrt(prev_s2);
            ls2 = egarch_step(omega, a, theta, lambda, ls2, z);
        }
        out.push(ls2.exp().max(VARIANCE_FLOOR));
    }
    out
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn garch_unpack(x: &[f64]) -> (f64, f64, f64) {
    let omega = x[0].exp();
    let pers = PERSISTENCE_BOUND * logistic(x[1]);
    let share = logistic(x[2]);
    (omega, pers * share, pers * (1.0 - share))
}

fn egarch_unpack(x: &[f64]) -> (f64, f64, f64, f64) {
    (x[0], PERSISTENCE_BOUND * x[1].tanh(), x[2], x[3])
}

fn second_moment(eps: &[f64]) -> f64 {
    eps.iter().map(|e| e * e).sum::<f64>() / eps.len() as f64
}

fn check_residuals(eps: &[f64]) -> Result<f64> {
    if eps.len() < MIN_VARIANCE_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_VARIANCE_LEN,
            got: eps.len(),
        });
    }
    if eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidInput(
            "residuals contain non-finite values".into(),
        ));
    }
    let m2 = second_moment(eps);
    if !(m2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(m2)
}

fn best_of_starts<F: Fn(&[f64]) -> f64>(f: F, starts: &[Vec<f64>], warm: bool) -> BfgsResult {
    let opts = BfgsOptions {
        max_iter: 300,
        grad_tol: 1e-7,
        f_tol: 1e-14,
    };
    let mut best: Option<BfgsResult> = None;
    for (i, x0) in starts.iter().enumerate() {
        let res = minimize(&f, x0, &opts);
        let good = res.converged && res.grad_max() <= GRAD_CHECK_TOL;
        if best.as_ref().is_none_or(|b| res.f < b.f) {
            best = Some(res);
        }
        if warm && i == 0 && good {
            break;
        }
    }
    best.expect("at least one start")
}

fn jittered(base: &[f64], count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let mut out = vec![base.to_vec()];
    for _ in 0..count {
        out.push(
            base.iter()
                .map(|x| x + rng.random_range(-0.5..0.5))
                .collect(),
        );
    }
    out
}

/// GARCH(1,1) by Gaussian maximum likelihood. `warm` holds optimizer
/// coordinates from an earlier fit.
pub fn fit_garch(eps: &[f64], warm: Option<&[f64]>) -> Result<VarianceFit> {
    let m2 = check_residuals(eps)?;
    let s = m2.sqrt();
    let z: Vec<f64> = eps.iter().map(|e| e / s).collect();
    let n = z.len() as f64;
    let f = |x: &[f64]| {
        let (omega, a, b) = garch_unpack(x);
        let v = garch_variances(omega, a, b, &z, 1.0);
        -gaussian_loglik(&z, &v) / n
    };
    let base = [
        0.1f64.ln(),
        logit(0.95 / PERSISTENCE_BOUND),
        logit(0.05 / 0.95),
    ];
    let mut starts = Vec::new();
    if let Some(w) = warm.filter(|w| w.len() == 3) {
        starts.push(w.to_vec());
    }
    starts.extend(jittered(&base, 2));
    let res = best_of_starts(f, &starts, warm.is_some());
    if !res.f.is_finite() {
        return Err(Error::FitFailed("GARCH likelihood not finite".into()));
    }
    let (omega_z, a, b) = garch_unpack(&res.x);
    let omega = omega_z * m2;
    let variances = garch_variances(omega, a, b, eps, m2);
    let loglik = gaussian_loglik(eps, &variances);
    let grad_max = res.grad_max();
    Ok(VarianceFit {
        kind: VarianceKind::Garch,
        omega,
        a,
        b,
        theta_g: 0.0,
        lambda_g: 0.0,
        loglik,
        aic: 2.0 * 3.0 - 2.0 * loglik,
        converged: res.converged && grad_max <= GRAD_CHECK_TOL,
        grad_max,
        initial_variance: m2,
        variances,
        raw_params: res.x,
    })
}

/// EGARCH(1,1) by Gaussian maximum likelihood.
pub fn fit_egarch(eps: &[f64], warm: Option<&[f64]>) -> Result<VarianceFit> {
    let m2 = check_residuals(eps)?;
    let s = m2.sqrt();
    let z: Vec<f64> = eps.iter().map(|e| e / s).collect();
    let n = z.len() as f64;
    let f = |x: &[f64]| {
        let (omega, a, theta, lambda) = egarch_unpack(x);
        let v = egarch_variances(omega, a, theta, lambda, &z, 1.0);
        -gaussian_loglik(&z, &v) / n
    };
    let base = [0.0, 0.9f64.atanh(), 0.0, 0.1];
    let mut starts = Vec::new();
    if let Some(w) = warm.filter(|w| w.len() == 4) {
        starts.push(w.to_vec());
    }
    starts.extend(jittered(&base, 2));
    let res = best_of_starts(f, &starts, warm.is_some());
    if !res.f.is_finite() {
        return Err(Error::FitFailed("EGARCH likelihood not finite".into()));
    }
    let (omega_z, a, theta_g, lambda_g) = egarch_unpack(&res.x);
    // log σ² shifts by log m2 under rescaling; the intercept absorbs (1 − a) of it.
    let omega = omega_z + (1.0 - a) * m2.ln();
    let variances = egarch_variances(omega, a, theta_g, lambda_g, eps, m2);
    let loglik = gaussian_loglik(eps, &variances);
    let grad_max = res.grad_max();
    Ok(VarianceFit {
        kind: VarianceKind::Egarch,
        omega,
        a,
        b: 1.0,
        theta_g,
        lambda_g,
        loglik,
        aic: 2.0 * 4.0 - 2.0 * loglik,
        converged: res.converged && grad_max <= GRAD_CHECK_TOL,
        grad_max,
        initial_variance: m2,
        variances,
        raw_params: res.x,
    })
}

fn constant_fit(eps: &[f64], m2: f64) -> VarianceFit {
    let variances = vec![m2; eps.len()];
    let loglik = gaussian_loglik(eps, &variances);
    VarianceFit {
        kind: VarianceKind::Constant,
        omega: m2,
        a: 0.0,
        b: 0.0,
        theta_g: 0.0,
        lambda_g: 0.0,
        loglik,
        aic: 2.0 - 2.0 * loglik,
        converged: false,
        grad_max: 0.0,
        initial_variance: m2,
        variances,
        raw_params: Vec::new(),
    }
}

/// Both variance fits and the chosen one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSelection {
    pub best: VarianceFit,
    pub garch: Option<VarianceFit>,
    pub egarch: Option<VarianceFit>,
    /// Neither dynamic model converged.
    pub fallback: bool,
}

/// Fits GARCH(1,1) and EGARCH(1,1) and keeps the converged one with the
/// lower AIC, or the constant-variance model if neither converges.
pub fn fit_variance(eps: &[f64]) -> Result<VarianceSelection> {
    fit_variance_warm(eps, None, None)
}

pub fn fit_variance_warm(
    eps: &[f64],
    warm_garch: Option<&[f64]>,
    warm_egarch: Option<&[f64]>,
) -> Result<VarianceSelection> {
    let m2 = check_residuals(eps)?;
    let garch = fit_garch(eps, warm_garch).ok();
    let egarch = fit_egarch(eps, warm_egarch).ok();
    let usable = |f: &Option<VarianceFit>| {
        f.as_ref()
            .filter(|f| f.converged && f.aic.is_finite())
            .cloned()
    };
    let best = match (usable(&garch), usable(&egarch)) {
        (Some(g), Some(e)) => Some(if e.aic < g.aic { e } else { g }),
        (Some(g), None) => Some(g),
        (None, Some(e)) => Some(e),
        (None, None) => None,
    };
    let fallback = best.is_none();
    if fallback {
        log::warn!("GARCH and EGARCH both failed; using constant variance");
    }
    Ok(VarianceSelection {
        best: best.unwrap_or_else(|| constant_fit(eps, m2)),
        garch,
        egarch,
        fallback,
    })
}
