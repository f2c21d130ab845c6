//! ARMA(p, q) mean models fitted by exact Gaussian likelihood.
//!
//! The model is `r_t = δ + Σ φ_i r_{t−i} − Σ θ_j ε_{t−j} + ε_t`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optim::{minimize, BfgsOptions};
use crate::error::{Error, Result};
use crate::stats::{mean, ols, sample_variance};

/// Shortest series accepted by the ARMA fit.
pub const MIN_ARMA_LEN: usize = 50;
/// Largest AR or MA order supported.
pub const MAX_ORDER: usize = 4;
const MAX_STATE: usize = MAX_ORDER + 1;
/// Bound on the scaled gradient at an accepted optimum.
pub const GRAD_CHECK_TOL: f64 = 1e-4;
/// Candidates with an AR or MA root of smaller modulus are rejected.
pub const MIN_ROOT_MODULUS: f64 = 1.01;
/// Smallest relative distance between an AR root and an MA root of an
/// identified fit; closer pairs nearly cancel.
pub const MIN_ROOT_SEPARATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Unconditional mean `δ / (1 − Σφ)`.
    pub mean: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    /// All AR and MA roots lie at least [`MIN_ROOT_MODULUS`] from the origin.
    pub interior: bool,
    /// No AR root lies within [`MIN_ROOT_SEPARATION`] of an MA root.
    pub identified: bool,
    /// Largest gradient component of the per-observation negative
    /// log-likelihood at the optimum, in optimizer coordinates.
    pub grad_max: f64,
    /// Conditional residuals over the fitted sample.
    pub residuals: Vec<f64>,
    /// Optimizer coordinates at the optimum (standardized data).
    pub raw_params: Vec<f64>,
}

impl ArmaFit {
    /// Number of free parameters: intercept, φ, θ and the innovation variance.
    pub fn n_params(&self) -> usize {
        self.p + self.q + 2
    }

    /// One-step forecast after the fitted sample.
    pub fn forecast_next(&self, series: &[f64]) -> f64 {
        forecast_mean(self.delta, &self.phi, &self.theta, series, &self.residuals)
    }
}

/// `δ + Σ φ_i r_{t+1−i} − Σ θ_j ε_{t+1−j}`; tails are chronological with
/// the most recent value last. Missing history counts as zero.
pub fn forecast_mean(
    delta: f64,
    phi: &[f64],
    theta: &[f64],
    series_tail: &[f64],
    resid_tail: &[f64],
) -> f64 {
    let mut f = delta;
    for (i, c) in phi.iter().enumerate() {
        if let Some(&y) = series_tail
            .len()
            .checked_sub(i + 1)
            .map(|k| &series_tail[k])
        {
            f += c * y;
        }
    }
    for (j, c) in theta.iter().enumerate() {
        if let Some(&e) = resid_tail.len().checked_sub(j + 1).map(|k| &resid_tail[k]) {
            f -= c * e;
        }
    }
    f
}

/// Conditional residuals with pre-sample observations at `mean` and
/// pre-sample innovations at zero.
pub fn conditional_residuals(
    series: &[f64],
    delta: f64,
    phi: &[f64],
    theta: &[f64],
    mean: f64,
) -> Vec<f64> {
    let mut eps = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let mut e = series[t] - delta;
        for (i, c) in phi.iter().enumerate() {
            let y = if t > i { series[t - i - 1] } else { mean };
            e -= c * y;
        }
        for (j, c) in theta.iter().enumerate() {
            if t > j {
                e += c * eps[t - j - 1];
            }
        }
        eps.push(e);
    }
    eps
}

/// Maps unconstrained values to the coefficients of a polynomial
/// `1 − Σ c_i z^i` with all roots outside the unit circle.
pub fn constrain_coefficients(u: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(u.len());
    for (k, &x) in u.iter().enumerate() {
        let r = x.tanh() * (1.0 - 1e-12);
        let prev = a.clone();
        a.push(r);
        for j in 0..k {
            a[j] = prev[j] - r * prev[k - 1 - j];
        }
    }
    a
}

/// Inverse of [`constrain_coefficients`]; partial coefficients are clipped
/// to `±0.95` when the input lies outside the stationary region.
pub fn unconstrain_coefficients(c: &[f64]) -> Vec<f64> {
    let mut a = c.to_vec();
    let mut u = vec![0.0; c.len()];
    for k in (0..c.len()).rev() {
        let r = a[k];
        if !r.is_finite() {
            return vec![0.0; c.len()];
        }
        let r = r.clamp(-0.95, 0.95);
        u[k] = r.atanh();
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 0..k {
            a[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
    }
    u
}

/// Reciprocal roots of `1 − Σ c_i z^i` (companion eigenvalues); empty for
/// a constant polynomial.
fn inverse_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let Some(deg) = c.iter().rposition(|&x| x != 0.0).map(|i| i + 1) else {
        return Vec::new();
    };
    let comp = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            c[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Smallest root modulus of `1 − Σ c_i z^i`, or infinity for a constant.
pub fn min_root_modulus(c: &[f64]) -> f64 {
    let largest = inverse_roots(c)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    1.0 / largest
}

/// Smallest distance between a root of the AR polynomial and a root of the
/// MA polynomial, relative to the smaller modulus of the pair; infinity when
/// either side has no roots.
pub fn ar_ma_root_separation(phi: &[f64], theta: &[f64]) -> f64 {
    let roots = |c: &[f64]| -> Vec<Complex<f64>> {
        inverse_roots(c)
            .iter()
            .filter(|z| z.norm() > 0.0)
            .map(|z| z.inv())
            .collect()
    };
    let (ar, ma) = (roots(phi), roots(theta));
    let mut gap = f64::INFINITY;
    for a in &ar {
        for m in &ma {
            gap = gap.min((a - m).norm() / a.norm().min(m.norm()));
        }
    }
    gap
}

type Mat = [[f64; MAX_STATE]; MAX_STATE];

/// Stationary state covariance solving `P = T P T' + R R'`.
fn initial_covariance(phi: &[f64], psi: &[f64], m: usize) -> Option<Mat> {
    let t = transition(phi, m);
    let r = loading(psi, m);
    let dim = m * m;
    let mut a = DMatrix::<f64>::identity(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for i in 0..m {
        for j in 0..m {
            b[i * m + j] = r[i] * r[j];
            for k in 0..m {
                for l in 0..m {
                    a[(i * m + j, k * m + l)] -= t[i][k] * t[j][l];
                }
            }
        }
    }
    let sol = a.lu().solve(&b)?;
    let mut p = [[0.0; MAX_STATE]; MAX_STATE];
    for i in 0..m {
        for j in 0..m {
            p[i][j] = 0.5 * (sol[i * m + j] + sol[j * m + i]);
        }
    }
    Some(p)
}

fn transition(phi: &[f64], m: usize) -> Mat {
    let mut t = [[0.0; MAX_STATE]; MAX_STATE];
    for (i, &c) in phi.iter().enumerate() {
        t[i][0] = c;
    }
    for i in 0..m.saturating_sub(1) {
        t[i][i + 1] = 1.0;
    }
    t
}

fn loading(psi: &[f64], m: usize) -> [f64; MAX_STATE] {
    let mut r = [0.0; MAX_STATE];
    r[0] = 1.0;
    for (j, &c) in psi.iter().enumerate() {
        if j + 1 < m {
            r[j + 1] = c;
        }
    }
    r
}

/// Concentrated exact Gaussian log-likelihood (innovation variance profiled
/// out) of a zero-mean ARMA process via the Kalman filter. Returns the
/// log-likelihood and the variance estimate.
pub fn exact_loglik(x: &[f64], phi: &[f64], theta: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    let psi: Vec<f64> = theta.iter().map(|t| -t).collect();
    let m = phi.len().max(theta.len() + 1);
    let r = loading(&psi, m);
    let mut p = initial_covariance(phi, &psi, m)?;
    let mut phi_full = [0.0; MAX_STATE];
    phi_full[..phi.len()].copy_from_slice(phi);
    let mut a = [0.0; MAX_STATE];
    let mut sum_ln_f = 0.0;
    let mut ssq = 0.0;
    let mut k = [0.0; MAX_STATE];
    let mut f;
    let mut t_obs = 0;
    // Full recursions until the state covariance stops changing. The
    // companion structure gives (T M)[i][j] = φ_i M[0][j] + M[i+1][j].
    while t_obs < n {
        let v = x[t_obs] - a[0];
        f = p[0][0];
        if !(f > 0.0 && f.is_finite()) {
            return None;
        }
        t_obs += 1;
        sum_ln_f += f.ln();
        ssq += v * v / f;
        let mut tp = [[0.0; MAX_STATE]; MAX_STATE];
        for i in 0..m {
            for j in 0..m {
                tp[i][j] = phi_full[i] * p[0][j] + if i + 1 < m { p[i + 1][j] } else { 0.0 };
            }
        }
        for i in 0..m {
            k[i] = tp[i][0] / f;
        }
        let a0 = a[0];
        for i in 0..m {
            a[i] = phi_full[i] * a0 + if i + 1 < m { a[i + 1] } else { 0.0 } + k[i] * v;
        }
        let mut change: f64 = 0.0;
        let mut pn = [[0.0; MAX_STATE]; MAX_STATE];
        for i in 0..m {
            for j in 0..m {
                let tpt = tp[i][0] * phi_full[j] + if j + 1 < m { tp[i][j + 1] } else { 0.0 };
                pn[i][j] = tpt + r[i] * r[j] - k[i] * k[j] * f;
                change = change.max((pn[i][j] - p[i][j]).abs());
            }
        }
        p = pn;
        if change <= 1e-13 {
            break;
        }
    }
    // Steady state: gain and innovation variance are fixed.
    if t_obs < n {
        f = p[0][0];
        if !(f > 0.0 && f.is_finite()) {
            return None;
        }
        for i in 0..m {
            k[i] = (phi_full[i] * p[0][0] + if i + 1 < m { p[i + 1][0] } else { 0.0 }) / f;
        }
        let mut ssq_tail = 0.0;
        for &obs in &x[t_obs..] {
            let v = obs - a[0];
            ssq_tail += v * v;
            let a0 = a[0];
            for i in 0..m - 1 {
                a[i] = phi_full[i] * a0 + a[i + 1] + k[i] * v;
            }
            a[m - 1] = phi_full[m - 1] * a0 + k[m - 1] * v;
        }
        let rest = (n - t_obs) as f64;
        ssq += ssq_tail / f;
        sum_ln_f += rest * f.ln();
    }
    let sigma2 = ssq / n as f64;
    if !(sigma2 > 0.0) {
        return None;
    }
    let nf = n as f64;
    let ll = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0) - 0.5 * sum_ln_f;
    Some((ll, sigma2))
}

pub(crate) fn check_series(series: &[f64], min_len: usize) -> Result<(f64, f64)> {
    if series.len() < min_len {
        return Err(Error::SeriesTooShort {
            needed: min_len,
            got: series.len(),
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "series contains non-finite values".into(),
        ));
    }
    let m = mean(series);
    let v = sample_variance(series);
    if !(v > 1e-20 * m * m) || v == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((m, v.sqrt()))
}

/// Hannan–Rissanen regression estimates `(φ, θ)` for standardized data.
fn css_start(z: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    let lagged = |rows: std::ops::Range<usize>, cols: &dyn Fn(usize, usize) -> f64, k: usize| {
        DMatrix::from_fn(rows.len(), k, |i, j| cols(rows.start + i, j))
    };
    let ehat: Vec<f64> = if q > 0 {
        let long = (p + q + 4).max(10).min(n / 5);
        let x = lagged(
            long..n,
            &|t, j| if j == 0 { 1.0 } else { z[t - j] },
            long + 1,
        );
        let y = DVector::from_iterator(n - long, z[long..].iter().copied());
        match ols(&x, &y) {
            Some(fit) => {
                let mut e = vec![0.0; n];
                e[long..].copy_from_slice(fit.residuals.as_slice());
                e
            }
            None => return (vec![0.0; p], vec![0.0; q]),
        }
    } else {
        vec![0.0; n]
    };
    let start = if q > 0 {
        (p + q + 4).max(10).min(n / 5) + q
    } else {
        p
    };
    let k = 1 + p + q;
    let x = lagged(
        start..n,
        &|t, j| {
            if j == 0 {
                1.0
            } else if j <= p {
                z[t - j]
            } else {
                ehat[t - (j - p)]
            }
        },
        k,
    );
    let y = DVector::from_iterator(n - start, z[start..].iter().copied());
    match ols(&x, &y) {
        Some(fit) => {
            let phi = fit.beta.as_slice()[1..=p].to_vec();
            let theta = fit.beta.as_slice()[p + 1..].iter().map(|c| -c).collect();
            (phi, theta)
        }
        None => (vec![0.0; p], vec![0.0; q]),
    }
}

fn unpack(x: &[f64], p: usize, q: usize) -> (f64, Vec<f64>, Vec<f64>) {
    (
        x[0],
        constrain_coefficients(&x[1..=p]),
        constrain_coefficients(&x[p + 1..p + 1 + q]),
    )
}

/// Fits one ARMA(p, q) by exact maximum likelihood, starting from the
/// regression estimates or from `warm` optimizer coordinates.
pub fn fit_arma_order(series: &[f64], p: usize, q: usize, warm: Option<&[f64]>) -> Result<ArmaFit> {
    if p > MAX_ORDER || q > MAX_ORDER || p + q == 0 {
        return Err(Error::InvalidInput(format!(
            "unsupported ARMA order ({p}, {q})"
        )));
    }
    let (ybar, sd) = check_series(series, MIN_ARMA_LEN)?;
    let z: Vec<f64> = series.iter().map(|y| (y - ybar) / sd).collect();
    let n = z.len() as f64;

    let objective = |x: &[f64]| {
        let (mu, phi, theta) = unpack(x, p, q);
        let centered: Vec<f64> = z.iter().map(|v| v - mu).collect();
        match exact_loglik(&centered, &phi, &theta) {
            Some((ll, _)) => -ll / n,
            None => f64::INFINITY,
        }
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm.filter(|w| w.len() == 1 + p + q) {
        starts.push(w.to_vec());
    }
    let (phi0, theta0) = css_start(&z, p, q);
    let mut css = vec![0.0];
    css.extend(unconstrain_coefficients(&phi0));
    css.extend(unconstrain_coefficients(&theta0));
    starts.push(css);

    let opts = BfgsOptions {
        max_iter: 200,
        grad_tol: 1e-7,
        f_tol: 1e-14,
    };
    let mut best = None::<super::optim::BfgsResult>;
    for (i, x0) in starts.iter().enumerate() {
        let res = minimize(objective, x0, &opts);
        let good = res.converged && res.grad_max() <= GRAD_CHECK_TOL;
        let better = best.as_ref().is_none_or(|b| res.f < b.f);
        if better {
            best = Some(res);
        }
        // A converged warm start is accepted without a cold restart.
        if i == 0 && warm.is_some() && good {
            break;
        }
    }
    let mut res = best.expect("at least one start");
    if !res.f.is_finite() {
        // Last resort from the origin.
        let zero = vec![0.0; 1 + p + q];
        let alt = minimize(objective, &zero, &opts);
        if alt.f < res.f || !res.f.is_finite() {
            res = alt;
        }
    }
    if !res.f.is_finite() {
        return Err(Error::FitFailed(format!(
            "ARMA({p},{q}) likelihood not finite"
        )));
    }

    let (mu_z, phi, theta) = unpack(&res.x, p, q);
    let centered: Vec<f64> = z.iter().map(|v| v - mu_z).collect();
    let (ll_z, sigma2_z) = exact_loglik(&centered, &phi, &theta)
        .ok_or_else(|| Error::FitFailed(format!("ARMA({p},{q}) likelihood not finite")))?;
    let mean = ybar + sd * mu_z;
    let delta = mean * (1.0 - phi.iter().sum::<f64>());
    let loglik = ll_z - n * sd.ln();
    let k = (p + q + 2) as f64;
    let residuals = conditional_residuals(series, delta, &phi, &theta, mean);
    let grad_max = res.grad_max();
    let interior =
        min_root_modulus(&phi) >= MIN_ROOT_MODULUS && min_root_modulus(&theta) >= MIN_ROOT_MODULUS;
    let identified = ar_ma_root_separation(&phi, &theta) >= MIN_ROOT_SEPARATION;
    Ok(ArmaFit {
        p,
        q,
        delta,
        phi,
        theta,
        mean,
        sigma2: sigma2_z * sd * sd,
        loglik,
        aic: 2.0 * k - 2.0 * loglik,
        converged: res.converged && grad_max <= GRAD_CHECK_TOL,
        interior,
        identified,
        grad_max,
        residuals,
        raw_params: res.x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub p: usize,
    pub q: usize,
    pub aic: f64,
    pub converged: bool,
    pub interior: bool,
    pub identified: bool,
    /// Optimizer coordinates of the fit; empty if the fit failed.
    pub raw_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSelection {
    pub best: ArmaFit,
    pub candidates: Vec<CandidateSummary>,
}

/// `true` if `(aic, p, q)` should replace the incumbent.
fn preferred(aic: f64, p: usize, q: usize, inc: &ArmaFit) -> bool {
    if aic != inc.aic {
        return aic < inc.aic;
    }
    if p + q != inc.p + inc.q {
        return p + q < inc.p + inc.q;
    }
    p < inc.p
}

/// Grid search over `(p, q) ∈ [0, max_p] × [0, max_q]` without `(0, 0)`,
/// keeping the converged candidate with the lowest AIC.
pub fn fit_arma(series: &[f64], max_p: usize, max_q: usize) -> Result<ArmaSelection> {
    fit_arma_warm(series, max_p, max_q, &[])
}

/// [`fit_arma`] with candidates started from earlier optimizer coordinates
/// of the same order where `warm` has them.
pub fn fit_arma_warm(
    series: &[f64],
    max_p: usize,
    max_q: usize,
    warm: &[CandidateSummary],
) -> Result<ArmaSelection> {
    check_series(series, MIN_ARMA_LEN)?;
    let mut best: Option<ArmaFit> = None;
    let mut candidates = Vec::new();
    for p in 0..=max_p.min(MAX_ORDER) {
        for q in 0..=max_q.min(MAX_ORDER) {
            if p + q == 0 {
                continue;
            }
            let start = warm
                .iter()
                .find(|c| c.p == p && c.q == q && !c.raw_params.is_empty());
            match fit_arma_order(series, p, q, start.map(|c| c.raw_params.as_slice())) {
                Ok(fit) => {
                    candidates.push(CandidateSummary {
                        p,
                        q,
                        aic: fit.aic,
                        converged: fit.converged,
                        interior: fit.interior,
                        identified: fit.identified,
                        raw_params: fit.raw_params.clone(),
                    });
                    if !fit.converged {
                        log::warn!(
                            "ARMA({p},{q}) did not converge (gradient {:e})",
                            fit.grad_max
                        );
                        continue;
                    }
                    if !fit.interior {
                        log::debug!("ARMA({p},{q}) rejected: root near the unit circle");
                        continue;
                    }
                    if !fit.identified {
                        log::debug!("ARMA({p},{q}) rejected: AR and MA roots nearly cancel");
                        continue;
                    }
                    if best.as_ref().is_none_or(|b| preferred(fit.aic, p, q, b)) {
                        best = Some(fit);
                    }
                }
                Err(e) => {
                    log::warn!("ARMA({p},{q}) skipped: {e}");
                    candidates.push(CandidateSummary {
                        p,
                        q,
                        aic: f64::NAN,
                        converged: false,
                        interior: false,
                        identified: false,
                        raw_params: Vec::new(),
                    });
                }
            }
        }
    }
    let best = best.ok_or_else(|| Error::FitFailed("no ARMA candidate converged".into()))?;
    Ok(ArmaSelection { best, candidates })
}
