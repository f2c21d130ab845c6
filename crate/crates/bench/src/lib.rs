//! Deterministic inputs for the benchmarks.

use liqjump_core::nalgebra::{DMatrix, DVector};
use liqjump_core::synth::{generate_asset, AssetDay};
use liqjump_core::tsmodel::simulate::{simulate_arma, standard_normals};
use liqjump_core::{MvProblem, SynthSpec, WashMode};

/// One generated asset-day with high-frequency wash bursts.
pub fn asset_day(seed: u64) -> AssetDay {
    let mut spec = SynthSpec::preset("hf_small").expect("preset exists");
    spec.seed = seed;
    spec.n_assets = 1;
    spec.n_days = 1;
    assert_eq!(spec.wash.mode, WashMode::HfSmall);
    let mut out = None;
    generate_asset(&spec, 0, |d| {
        out = Some(d);
        Ok(())
    })
    .expect("generation succeeds");
    out.expect("one day generated")
}

/// Mean-variance problem with a risk-free asset at index 0 and `risky`
/// assets whose covariance comes from a simulated return panel.
pub fn mv_problem(risky: usize, seed: u64) -> MvProblem {
    let days = 365;
    let z = standard_normals(seed, risky * days);
    let panel = DMatrix::from_fn(days, risky, |d, a| {
        0.02 * z[a * days + d] + 0.0005 * a as f64
    });
    let means = panel.row_mean();
    let centered = DMatrix::from_fn(days, risky, |d, a| panel[(d, a)] - means[a]);
    let cov = centered.transpose() * &centered / (days - 1) as f64;
    let n = risky + 1;
    let mut sigma = DMatrix::zeros(n, n);
    sigma.view_mut((1, 1), (risky, risky)).copy_from(&cov);
    let mut mu = DVector::zeros(n);
    for a in 0..risky {
        mu[a + 1] = means[a];
    }
    MvProblem {
        mu,
        sigma,
        lambda: 3.0,
        cap: 0.3,
        riskfree_index: Some(0),
    }
}

/// A 365-day ARMA(1,1) return series.
pub fn return_window(seed: u64) -> Vec<f64> {
    let z = standard_normals(seed, 465);
    simulate_arma(0.0005, &[0.3], &[-0.2], 0.02, &z, 100)
}
