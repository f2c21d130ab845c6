//! Seeded simulators for ARMA and conditional-variance processes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `n` standard normal draws from a ChaCha8 stream seeded with `seed`.
pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// ARMA path `r_t = δ + Σ φ_i r_{t−i} − Σ θ_j ε_{t−j} + ε_t` with
/// `ε_t = sigma · shocks[t]`; the first `burn` values are discarded.
pub fn simulate_arma(
    delta: f64,
    phi: &[f64],
    theta: &[f64],
    sigma: f64,
    shocks: &[f64],
    burn: usize,
) -> Vec<f64> {
    let n = shocks.len();
    let mut y = vec![0.0; n];
    for t in 0..n {
        let mut v = delta + sigma * shocks[t];
        for (i, c) in phi.iter().enumerate() {
            if t > i {
                v += c * y[t - i - 1];
            }
        }
        for (j, c) in theta.iter().enumerate() {
            if t > j {
                v -= c * sigma * shocks[t - j - 1];
            }
        }
        y[t] = v;
    }
    y.split_off(burn.min(n))
}

/// GARCH(1,1) innovations started at the unconditional variance.
pub fn simulate_garch(omega: f64, a: f64, b: f64, shocks: &[f64], burn: usize) -> Vec<f64> {
    let mut s2 = omega / (1.0 - a - b);
    let mut out = Vec::with_capacity(shocks.len());
    for &z in shocks {
        let e = s2.sqrt() * z;
        out.push(e);
        s2 = omega + a * e * e + b * s2;
    }
    out.split_off(burn.min(shocks.len()))
}

/// EGARCH(1,1) innovations with `log σ²_t = ω + θ Z + λ(|Z| − E|Z|) + a log σ²_{t−1}`.
pub fn simulate_egarch(
    omega: f64,
    a: f64,
    theta: f64,
    lambda: f64,
    shocks: &[f64],
    burn: usize,
) -> Vec<f64> {
    let mut ls2 = omega / (1.0 - a);
    let mut out = Vec::with_capacity(shocks.len());
    for &z in shocks {
        out.push((0.5 * ls2).exp() * z);
        ls2 = omega + theta * z + lambda * (z.abs() - super::variance::E_ABS_Z) + a * ls2;
    }
    out.split_off(burn.min(shocks.len()))
}
