use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{kkt_residual, repair_psd, MvProblem};
use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const KKT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ActiveSet,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvSolution {
    pub weights: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub jitter: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Solves the mean-variance problem by a primal active-set method, falling
/// back to projected gradient if the active set fails to certify.
pub fn solve_mv(problem: &MvProblem) -> Result<MvSolution> {
    problem.validate()?;
    let (sigma, jitter) = repair_psd(&problem.sigma)?;
    let repaired = MvProblem {
        sigma,
        ..problem.clone()
    };

    let (w, iterations) = active_set(&repaired);
    let res = kkt_residual(&repaired, &w);
    if res <= KKT_TOL {
        return Ok(finish(
            problem,
            &repaired,
            w,
            iterations,
            jitter,
            SolveMethod::ActiveSet,
        ));
    }
    log::warn!("active set ended with KKT residual {res:e}; using projected gradient");
    let (w, iterations) = projected_gradient(&repaired, w);
    let res = kkt_residual(&repaired, &w);
    if res > KKT_TOL {
        return Err(Error::FitFailed(format!(
            "mean-variance solver KKT residual {res:e}"
        )));
    }
    Ok(finish(
        problem,
        &repaired,
        w,
        iterations,
        jitter,
        SolveMethod::ProjectedGradient,
    ))
}

fn finish(
    original: &MvProblem,
    repaired: &MvProblem,
    w: DVector<f64>,
    iterations: usize,
    jitter: f64,
    method: SolveMethod,
) -> MvSolution {
    MvSolution {
        objective: original.objective(&w),
        kkt_residual: kkt_residual(repaired, &w),
        weights: w,
        iterations,
        jitter,
        method,
    }
}

fn initial_point(p: &MvProblem) -> (DVector<f64>, Vec<Bound>) {
    let n = p.n();
    let mut w = DVector::zeros(n);
    let mut state = vec![Bound::Lower; n];
    if let Some(rf) = p.riskfree_index {
        w[rf] = 1.0;
        state[rf] = Bound::Free;
        return (w, state);
    }
    // Fill assets in order up to their bounds; the last one filled is free.
    let mut left = 1.0;
    for i in 0..n {
        let take = p.upper_bound(i).min(left);
        w[i] = take;
        left -= take;
        if left <= 0.0 {
            state[i] = if take >= p.upper_bound(i) {
                Bound::Upper
            } else {
                Bound::Free
            };
            break;
        }
        state[i] = Bound::Upper;
    }
    if !state.contains(&Bound::Free) {
        // Release the last upper-bound asset so the equality has a free variable.
        if let Some(i) = state.iter().rposition(|&s| s == Bound::Upper) {
            state[i] = Bound::Free;
        }
    }
    (w, state)
}

/// Orthonormal basis of `{d : Σ d = 0}` in `k` dimensions (Helmert contrasts).
fn sum_zero_basis(k: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(k, k.saturating_sub(1));
    for c in 0..k.saturating_sub(1) {
        let m = (c + 1) as f64;
        let norm = (m * (m + 1.0)).sqrt();
        for r in 0..=c {
            z[(r, c)] = 1.0 / norm;
        }
        z[(c + 1, c)] = -m / norm;
    }
    z
}

fn active_set(p: &MvProblem) -> (DVector<f64>, usize) {
    let n = p.n();
    let (mut w, mut state) = initial_point(p);
    let h = &p.sigma * p.lambda;
    let scale = 1f64.max(p.mu.amax()).max(h.amax());

    for iter in 0..MAX_ITER {
        let g = &h * &w - &p.mu;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        let mut dir = DVector::zeros(n);
        let mut unbounded = false;
        if free.len() >= 2 {
            let k = free.len();
            let z = sum_zero_basis(k);
            let hf = DMatrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
            let gf = DVector::from_fn(k, |a, _| g[free[a]]);
            let hr = z.transpose() * &hf * &z;
            let gr = z.transpose() * &gf;
            let eig = SymmetricEigen::new(hr);
            let emax = eig.eigenvalues.amax();
            let etol = 1e-12 * emax.max(scale);
            let mut step_r = DVector::zeros(k - 1);
            let mut null_r = DVector::zeros(k - 1);
            for (j, &ev) in eig.eigenvalues.iter().enumerate() {
                let u = eig.eigenvectors.column(j);
                let c = u.dot(&gr);
                if ev > etol {
                    step_r -= u * (c / ev);
                } else {
                    null_r -= u * c;
                }
            }
            // A descent direction of zero curvature runs until a bound blocks it.
            let use_null = null_r.norm() > 1e-13 * scale;
            unbounded = use_null;
            let dr = if use_null { null_r } else { step_r };
            let df = z * dr;
            for (a, &i) in free.iter().enumerate() {
                dir[i] = df[a];
            }
        }

        if dir.amax() <= 1e-15 {
            // Stationary on the working set: inspect bound multipliers.
            let nu = if free.is_empty() {
                let hi = (0..n)
                    .filter(|&i| state[i] == Bound::Upper)
                    .map(|i| g[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let lo = (0..n)
                    .filter(|&i| state[i] == Bound::Lower)
                    .map(|i| g[i])
                    .fold(f64::INFINITY, f64::min);
                match (hi.is_finite(), lo.is_finite()) {
                    (true, true) => 0.5 * (hi + lo),
                    (true, false) => hi,
                    (false, true) => lo,
                    _ => 0.0,
                }
            } else {
                free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
            };
            let mut worst = None;
            let mut worst_val = -1e-13 * scale;
            for i in 0..n {
                let mult = match state[i] {
                    Bound::Free => continue,
                    Bound::Lower => g[i] - nu,
                    Bound::Upper => nu - g[i],
                };
                if mult < worst_val {
                    worst_val = mult;
                    worst = Some(i);
                }
            }
            match worst {
                None => return (w, iter),
                Some(i) => {
                    state[i] = Bound::Free;
                    continue;
                }
            }
        }

        let mut alpha = if unbounded { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for &i in &free {
            let d = dir[i];
            let limit = if d < 0.0 {
                (0.0 - w[i]) / d
            } else if d > 0.0 {
                (p.upper_bound(i) - w[i]) / d
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit.max(0.0);
                blocking = Some((i, if d < 0.0 { Bound::Lower } else { Bound::Upper }));
            }
        }
        if !alpha.is_finite() {
            break;
        }
        w.axpy(alpha, &dir, 1.0);
        if let Some((i, b)) = blocking {
            state[i] = b;
            w[i] = if b == Bound::Lower {
                0.0
            } else {
                p.upper_bound(i)
            };
        }
        // Re-impose the budget on the free variables to stop drift.
        let drift = w.sum() - 1.0;
        let still_free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        if !still_free.is_empty() && drift != 0.0 {
            let share = drift / still_free.len() as f64;
            for &i in &still_free {
                w[i] = (w[i] - share).clamp(0.0, p.upper_bound(i));
            }
        }
    }
    (w, MAX_ITER)
}

/// Euclidean projection onto `{Σw = 1, 0 ≤ w ≤ ub}` by bisection on the shift.
fn project(p: &MvProblem, v: &DVector<f64>) -> DVector<f64> {
    let n = p.n();
    let clip = |t: f64| DVector::from_fn(n, |i, _| (v[i] - t).clamp(0.0, p.upper_bound(i)));
    let mut lo = v.min() - 1.0;
    let mut hi = v.max();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clip(mid).sum() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

fn projected_gradient(p: &MvProblem, start: DVector<f64>) -> (DVector<f64>, usize) {
    let h = &p.sigma * p.lambda;
    let lip = SymmetricEigen::new(h.clone()).eigenvalues.max().max(1e-12);
    let step = 1.0 / lip;
    let mut w = project(p, &start);
    for iter in 0..100_000 {
        let g = &h * &w - &p.mu;
        let next = project(p, &(&w - g * step));
        let moved = (&next - &w).amax();
        w = next;
        if moved <= 1e-16 || (iter % 100 == 0 && kkt_residual(p, &w) <= KKT_TOL * 0.1) {
            return (w, iter);
        }
    }
    (w, 100_000)
}
