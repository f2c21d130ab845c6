//! Long-only, box-capped mean-variance optimization.

mod active_set;
mod brute;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance};

pub use active_set::{solve_mv, MvSolution, SolveMethod};
pub use brute::{brute_force_mv, BruteForceResult, MAX_BRUTE_ASSETS};

/// Largest diagonal jitter allowed when repairing a covariance matrix.
pub const MAX_JITTER: f64 = 1e-6;
/// Default per-asset weight cap for risky assets.
pub const DEFAULT_CAP: f64 = 0.3;
/// Floor used when the estimated risk aversion is not positive.
pub const DEFAULT_LAMBDA_FLOOR: f64 = 0.1;

/// `max μ'w − λ/2 w'Σw` subject to `Σw = 1`, `0 ≤ w`, `w_i ≤ cap` for risky
/// assets. The risk-free asset, if present, has zero return and zero
/// covariance and is bounded only by 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MvProblem {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub lambda: f64,
    pub cap: f64,
    pub riskfree_index: Option<usize>,
}

impl MvProblem {
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn upper_bound(&self, i: usize) -> f64 {
        if Some(i) == self.riskfree_index {
            1.0
        } else {
            self.cap.min(1.0)
        }
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        self.mu.dot(w) - 0.5 * self.lambda * w.dot(&(&self.sigma * w))
    }

    /// Checks shapes, finiteness and the risk-free row convention.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.sigma.nrows() != n || self.sigma.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "problem dimensions disagree: mu {n}, sigma {}x{}",
                self.sigma.nrows(),
                self.sigma.ncols()
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "risk aversion must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.cap > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cap must be positive, got {}",
                self.cap
            )));
        }
        if self
            .mu
            .iter()
            .chain(self.sigma.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidInput("non-finite problem data".into()));
        }
        if let Some(rf) = self.riskfree_index {
            if rf >= n {
                return Err(Error::InvalidInput(format!(
                    "risk-free index {rf} out of range"
                )));
            }
            let zero_row = (0..n).all(|j| self.sigma[(rf, j)] == 0.0 && self.sigma[(j, rf)] == 0.0);
            if self.mu[rf] != 0.0 || !zero_row {
                return Err(Error::InvalidInput(
                    "risk-free asset must have zero return and covariance".into(),
                ));
            }
        }
        let capacity: f64 = (0..n).map(|i| self.upper_bound(i)).sum();
        if capacity < 1.0 - 1e-12 {
            return Err(Error::Infeasible(format!(
                "{n} assets with cap {} cannot sum to one",
                self.cap
            )));
        }
        Ok(())
    }
}

/// Symmetrizes `sigma` and adds the smallest diagonal jitter making it
/// positive semidefinite. Returns the repaired matrix and the jitter used.
pub fn repair_psd(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let mut s = (sigma + sigma.transpose()) * 0.5;
    if s.nrows() == 0 {
        return Ok((s, 0.0));
    }
    let min_eig = SymmetricEigen::new(s.clone()).eigenvalues.min();
    if min_eig >= 0.0 {
        return Ok((s, 0.0));
    }
    if -min_eig > MAX_JITTER {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
        });
    }
    let jitter = -min_eig;
    for i in 0..s.nrows() {
        s[(i, i)] += jitter;
    }
    Ok((s, jitter))
}

/// Stationarity, feasibility and complementarity residual of `w`, scaled by
/// `max(1, |μ|∞, λ|Σ|∞)`.
pub fn kkt_residual(problem: &MvProblem, w: &DVector<f64>) -> f64 {
    let n = problem.n();
    let g = &problem.sigma * w * problem.lambda - &problem.mu;
    let tol = 1e-12;
    let mut hi_free_upper = f64::NEG_INFINITY;
    let mut lo_free_lower = f64::INFINITY;
    let mut primal: f64 = (w.sum() - 1.0).abs();
    for i in 0..n {
        let ub = problem.upper_bound(i);
        primal = primal.max(-w[i]).max(w[i] - ub);
        let at_lower = w[i] <= tol;
        let at_upper = w[i] >= ub - tol;
        // Stationarity g_i = ν + z_lower − z_upper; a variable at a bound
        // bounds ν from one side only.
        if !at_lower {
            hi_free_upper = hi_free_upper.max(g[i]);
        }
        if !at_upper {
            lo_free_lower = lo_free_lower.min(g[i]);
        }
    }
    let dual = if hi_free_upper.is_finite() && lo_free_lower.is_finite() {
        ((hi_free_upper - lo_free_lower) / 2.0).max(0.0)
    } else {
        0.0
    };
    let scale = 1f64.max(problem.mu.amax()).max(
        problem.lambda
            * problem
                .sigma
                .row_iter()
                .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max),
    );
    (dual / scale).max(primal)
}

/// Risk aversion estimated from a window of market returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskAversion {
    pub lambda: f64,
    /// The raw ratio was not positive and the floor was used.
    pub clamped: bool,
}

/// `λ = mean / variance` of market returns, clamped to `floor` when ≤ 0.
pub fn risk_aversion(market_returns: &[f64], floor: f64) -> Result<RiskAversion> {
    if market_returns.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: market_returns.len(),
        });
    }
    let m = mean(market_returns);
    let v = sample_variance(market_returns);
    if !(v > 1e-20 * m * m) {
        return Err(Error::ZeroVariance);
    }
    let lambda = m / v;
    if lambda > 0.0 {
        Ok(RiskAversion {
            lambda,
            clamped: false,
        })
    } else {
        Ok(RiskAversion {
            lambda: floor,
            clamped: true,
        })
    }
}

/// λ from a known mean and variance.
pub fn risk_aversion_from_moments(mean: f64, variance: f64, floor: f64) -> Result<RiskAversion> {
    if !(variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let lambda = mean / variance;
    Ok(if lambda > 0.0 {
        RiskAversion {
            lambda,
            clamped: false,
        }
    } else {
        RiskAversion {
            lambda: floor,
            clamped: true,
        }
    })
}
