use nalgebra::DVector;

use super::MvProblem;
use crate::error::{Error, Result};

/// Largest problem the exhaustive scan accepts.
pub const MAX_BRUTE_ASSETS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub weights: DVector<f64>,
    pub objective: f64,
    /// Simplex grid points visited, feasible or not.
    pub scanned: usize,
    pub feasible: usize,
}

/// Exhaustive scan of the simplex grid with spacing `grid_step`; the first
/// best point in lexicographic order wins.
pub fn brute_force_mv(problem: &MvProblem, grid_step: f64) -> Result<BruteForceResult> {
    let n = problem.n();
    if n > MAX_BRUTE_ASSETS {
        return Err(Error::TooManyAssets {
            max: MAX_BRUTE_ASSETS,
            got: n,
        });
    }
    problem.validate()?;
    let units = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || (units * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    let units = units as usize;
    let ub: Vec<f64> = (0..n).map(|i| problem.upper_bound(i) + 1e-12).collect();

    let mut counts = vec![0usize; n];
    let mut w = DVector::zeros(n);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut scanned = 0;
    let mut feasible = 0;
    loop {
        let used: usize = counts[..n - 1].iter().sum();
        if used <= units {
            counts[n - 1] = units - used;
            scanned += 1;
            for i in 0..n {
                w[i] = counts[i] as f64 / units as f64;
            }
            if (0..n).all(|i| w[i] <= ub[i]) {
                feasible += 1;
                let obj = problem.objective(&w);
                if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                    best = Some((obj, w.clone()));
                }
            }
        }
        // Odometer over the first n − 1 coordinates.
        let mut k = 0;
        loop {
            if k + 1 >= n {
                let (objective, weights) =
                    best.ok_or_else(|| Error::Infeasible("no feasible grid point".into()))?;
                return Ok(BruteForceResult {
                    weights,
                    objective,
                    scanned,
                    feasible,
                });
            }
            counts[k] += 1;
            if counts[..n - 1].iter().sum::<usize>() <= units {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}
