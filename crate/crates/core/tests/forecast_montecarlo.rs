//! Monte Carlo checks of the ARMA selection on white noise.

use liqjump_core::stats::{mean, sample_std};
use liqjump_core::tsmodel::fit_arma;
use liqjump_core::tsmodel::simulate::standard_normals;

#[test]
fn white_noise_forecast_stays_near_the_sample_mean() {
    let runs = 20;
    let mut hits = 0;
    for s in 0..runs {
        let y: Vec<f64> = standard_normals(9000 + s, 2000)
            .iter()
            .map(|z| 0.5 + z)
            .collect();
        let sel = fit_arma(&y, 4, 4).unwrap();
        let se = sample_std(&y) / (y.len() as f64).sqrt();
        if (sel.best.forecast_next(&y) - mean(&y)).abs() <= 2.0 * se {
            hits += 1;
        }
    }
    assert!(hits * 10 >= runs * 9, "{hits}/{runs} forecasts within 2 SE");
}
