use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::portfolio::{PortfolioKind, PortfolioSpec, ReturnBasis};
use super::report::{BacktestReport, PortfolioReport};
use crate::error::{Error, Result};
use crate::liquidity::DailyRecord;
use crate::optimizer::{risk_aversion, solve_mv, MvProblem, DEFAULT_CAP, DEFAULT_LAMBDA_FLOOR};
use crate::stats::sample_covariance;
use crate::tsmodel::{rolling_forecasts, ForecastTable, RollingConfig};

/// Per-asset day records with and without the wash treatment, indexed
/// `[asset][day]`. Both sets share regular returns and amounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseData {
    pub assets: Vec<String>,
    pub untreated: Vec<Vec<DailyRecord>>,
    /// Empty when the treated branch was not built.
    pub treated: Vec<Vec<DailyRecord>>,
}

impl UniverseData {
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_days(&self) -> usize {
        self.untreated.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_days();
        if self.assets.is_empty() || self.untreated.len() != self.assets.len() {
            return Err(Error::InvalidInput(
                "universe has no assets or mismatched asset rows".into(),
            ));
        }
        if !self.treated.is_empty() && self.treated.len() != self.assets.len() {
            return Err(Error::InvalidInput(
                "treated records cover a different asset set".into(),
            ));
        }
        for set in [&self.untreated, &self.treated] {
            for (a, days) in set.iter().enumerate() {
                if days.len() != n {
                    return Err(Error::MissingDay {
                        day: days.len().min(n),
                        what: format!(
                            "asset {} has {} days, expected {n}",
                            self.assets[a],
                            days.len()
                        ),
                    });
                }
                if let Some((d, _)) = days.iter().enumerate().find(|(d, r)| r.day_index != *d) {
                    return Err(Error::MissingDay {
                        day: d,
                        what: format!("asset {} day sequence broken", self.assets[a]),
                    });
                }
            }
        }
        Ok(())
    }

    fn records(&self, treated: bool) -> Result<&Vec<Vec<DailyRecord>>> {
        if treated {
            if self.treated.is_empty() {
                return Err(Error::InvalidInput(
                    "treated day records are required but were not built".into(),
                ));
            }
            Ok(&self.treated)
        } else {
            Ok(&self.untreated)
        }
    }

    /// Regular daily returns `[asset][day]`.
    pub fn regular_returns(&self) -> Vec<Vec<f64>> {
        self.untreated
            .iter()
            .map(|d| d.iter().map(|r| r.r_daily).collect())
            .collect()
    }

    /// Liquidity-adjusted daily returns `[asset][day]`.
    pub fn adjusted_returns(&self, treated: bool) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .records(treated)?
            .iter()
            .map(|d| d.iter().map(|r| r.r_daily_adj).collect())
            .collect())
    }

    /// Return series a portfolio estimates from.
    pub fn basis_returns(&self, spec: &PortfolioSpec) -> Result<Vec<Vec<f64>>> {
        match spec.basis {
            ReturnBasis::Regular => Ok(self.regular_returns()),
            ReturnBasis::LiquidityAdjusted => self.adjusted_returns(spec.uses_treated()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub window: usize,
    pub cap: f64,
    pub lambda_floor: f64,
    /// Portfolio ids to run.
    pub portfolios: Vec<u8>,
    /// Substitute for a zero `β_r` in inverse-liquidity weights.
    pub inverse_floor: f64,
    /// Order grid and refit schedule of the return forecasts; its window is
    /// replaced by `window`.
    pub rolling: RollingConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: 365,
            cap: DEFAULT_CAP,
            lambda_floor: DEFAULT_LAMBDA_FLOOR,
            portfolios: (1..=12).collect(),
            inverse_floor: 1e-6,
            rolling: RollingConfig::default(),
        }
    }
}

impl BacktestConfig {
    pub fn specs(&self) -> Result<Vec<PortfolioSpec>> {
        if self.portfolios.is_empty() {
            return Err(Error::InvalidInput("no portfolios selected".into()));
        }
        self.portfolios
            .iter()
            .map(|&id| PortfolioSpec::by_id(id))
            .collect()
    }

    fn rolling(&self) -> RollingConfig {
        RollingConfig {
            window: self.window,
            ..self.rolling
        }
    }
}

/// One-step forecasts for the three return bases; only the bases used by
/// selected forecast portfolios need to be present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BacktestForecasts {
    pub regular: Option<ForecastTable>,
    pub treated: Option<ForecastTable>,
    pub untreated: Option<ForecastTable>,
}

impl BacktestForecasts {
    fn table(&self, spec: &PortfolioSpec) -> Option<&ForecastTable> {
        match (spec.basis, spec.uses_treated()) {
            (ReturnBasis::Regular, _) => self.regular.as_ref(),
            (ReturnBasis::LiquidityAdjusted, true) => self.treated.as_ref(),
            (ReturnBasis::LiquidityAdjusted, false) => self.untreated.as_ref(),
        }
    }
}

/// Runs the rolling forecasts needed by the selected forecast portfolios.
pub fn compute_forecasts(
    universe: &UniverseData,
    cfg: &BacktestConfig,
) -> Result<BacktestForecasts> {
    let mut out = BacktestForecasts::default();
    let rolling = cfg.rolling();
    for spec in cfg
        .specs()?
        .iter()
        .filter(|s| s.kind == PortfolioKind::MvForecast)
    {
        let slot = match (spec.basis, spec.uses_treated()) {
            (ReturnBasis::Regular, _) => &mut out.regular,
            (ReturnBasis::LiquidityAdjusted, true) => &mut out.treated,
            (ReturnBasis::LiquidityAdjusted, false) => &mut out.untreated,
        };
        if slot.is_none() {
            *slot = Some(rolling_forecasts(&universe.basis_returns(spec)?, &rolling)?);
        }
    }
    Ok(out)
}

/// Amount-weighted market return of each day.
pub fn market_returns(universe: &UniverseData) -> Vec<f64> {
    (0..universe.n_days())
        .map(|d| {
            let total: f64 = universe.untreated.iter().map(|a| a[d].amount).sum();
            if total > 0.0 {
                universe
                    .untreated
                    .iter()
                    .map(|a| a[d].amount * a[d].r_daily)
                    .sum::<f64>()
                    / total
            } else {
                universe.untreated.iter().map(|a| a[d].r_daily).sum::<f64>()
                    / universe.n_assets() as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkWeights {
    pub weights: Vec<f64>,
    /// A zero `β_r` was replaced by the floor.
    pub floored: bool,
}

/// Risky-asset weights of Portfolios 1–6 from one day's amounts and `β_r`.
pub fn benchmark_weights(
    kind: PortfolioKind,
    amounts: &[f64],
    beta_r: &[f64],
    inverse_floor: f64,
) -> Result<BenchmarkWeights> {
    let n = amounts.len();
    if n == 0 || beta_r.len() != n {
        return Err(Error::InvalidInput(
            "benchmark inputs are empty or differ in length".into(),
        ));
    }
    let normalize = |raw: Vec<f64>| -> Result<Vec<f64>> {
        let s: f64 = raw.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(
                "benchmark weights do not have a positive total".into(),
            ));
        }
        Ok(raw.into_iter().map(|x| x / s).collect())
    };
    let mut floored = false;
    let weights = match kind {
        PortfolioKind::Equal => vec![1.0 / n as f64; n],
        PortfolioKind::Market => normalize(amounts.to_vec())?,
        PortfolioKind::LiquidityWeight => normalize(beta_r.to_vec())?,
        PortfolioKind::InverseLiquidityWeight => normalize(
            beta_r
                .iter()
                .map(|&b| {
                    if b == 0.0 {
                        floored = true;
                        1.0 / inverse_floor
                    } else {
                        1.0 / b
                    }
                })
                .collect(),
        )?,
        _ => {
            return Err(Error::InvalidInput(format!(
                "{kind:?} is not a benchmark portfolio"
            )))
        }
    };
    Ok(BenchmarkWeights { weights, floored })
}

/// Weights chosen on day `date_index` and their realization on the next day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayOutcome {
    /// Decision day `t`.
    pub date_index: usize,
    /// Risk-free weight first, then one weight per asset.
    pub weights: Vec<f64>,
    /// Regular return realized on day `t + 1`.
    pub realized_return: f64,
    /// `sqrt(w' Σ w)` with the window covariance of regular returns.
    pub volatility: f64,
    pub lambda: Option<f64>,
    pub lambda_clamped: bool,
    pub inverse_floored: bool,
}

fn column_window(series: &[Vec<f64>], lo: usize, hi: usize) -> Vec<Vec<f64>> {
    (lo..=hi)
        .map(|d| series.iter().map(|a| a[d]).collect())
        .collect()
}

fn to_matrix(cov: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cov.len();
    DMatrix::from_fn(n, n, |i, j| cov[i][j])
}

struct Inputs<'a> {
    universe: &'a UniverseData,
    specs: Vec<PortfolioSpec>,
    regular: Vec<Vec<f64>>,
    treated_adj: Option<Vec<Vec<f64>>>,
    untreated_adj: Option<Vec<Vec<f64>>>,
    market: Vec<f64>,
    forecasts: &'a BacktestForecasts,
    cfg: &'a BacktestConfig,
}

impl Inputs<'_> {
    fn basis(&self, spec: &PortfolioSpec) -> &[Vec<f64>] {
        match (spec.basis, spec.uses_treated()) {
            (ReturnBasis::Regular, _) => &self.regular,
            (ReturnBasis::LiquidityAdjusted, true) => self
                .treated_adj
                .as_deref()
                .expect("treated series prepared"),
            (ReturnBasis::LiquidityAdjusted, false) => self
                .untreated_adj
                .as_deref()
                .expect("untreated series prepared"),
        }
    }

    fn day(&self, t: usize) -> Result<Vec<DayOutcome>> {
        let n = self.universe.n_assets();
        let lo = t + 1 - self.cfg.window;
        let reg_cov = to_matrix(&sample_covariance(&column_window(&self.regular, lo, t)));
        let next: Vec<f64> = self.regular.iter().map(|a| a[t + 1]).collect();

        let needs_lambda = self.specs.iter().any(|s| s.kind.is_mean_variance());
        let ra = if needs_lambda {
            Some(risk_aversion(&self.market[lo..=t], self.cfg.lambda_floor)?)
        } else {
            None
        };

        let mut out = Vec::with_capacity(self.specs.len());
        for spec in &self.specs {
            let mut inverse_floored = false;
            let risky: Vec<f64> = if spec.kind.is_mean_variance() {
                let basis = self.basis(spec);
                let window = column_window(basis, lo, t);
                let cov = if spec.basis == ReturnBasis::Regular {
                    reg_cov.clone()
                } else {
                    to_matrix(&sample_covariance(&window))
                };
                let mu: Vec<f64> = if spec.kind == PortfolioKind::MvForecast {
                    let table = self.forecasts.table(spec).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "forecasts for portfolio {} were not supplied",
                            spec.id
                        ))
                    })?;
                    table.mu_hat(t + 1).ok_or_else(|| Error::MissingDay {
                        day: t + 1,
                        what: format!("no forecast for portfolio {}", spec.id),
                    })?
                } else {
                    (0..n)
                        .map(|i| window.iter().map(|row| row[i]).sum::<f64>() / window.len() as f64)
                        .collect()
                };
                let problem = MvProblem {
                    mu: DVector::from_fn(n + 1, |i, _| if i == 0 { 0.0 } else { mu[i - 1] }),
                    sigma: DMatrix::from_fn(n + 1, n + 1, |i, j| {
                        if i == 0 || j == 0 {
                            0.0
                        } else {
                            cov[(i - 1, j - 1)]
                        }
                    }),
                    lambda: ra.expect("lambda computed").lambda,
                    cap: self.cfg.cap,
                    riskfree_index: Some(0),
                };
                let sol = solve_mv(&problem).map_err(|e| match e {
                    Error::NotPsd { .. } | Error::Infeasible(_) => e,
                    other => Error::FitFailed(format!("portfolio {} day {t}: {other}", spec.id)),
                })?;
                sol.weights.iter().copied().collect()
            } else {
                let recs = if spec.uses_treated() {
                    &self.universe.treated
                } else {
                    &self.universe.untreated
                };
                let amounts: Vec<f64> = self
                    .universe
                    .untreated
                    .iter()
                    .map(|a| a[t].amount)
                    .collect();
                let betas: Vec<f64> = recs.iter().map(|a| a[t].beta_jump).collect();
                let bw = benchmark_weights(spec.kind, &amounts, &betas, self.cfg.inverse_floor)?;
                inverse_floored = bw.floored;
                std::iter::once(0.0).chain(bw.weights).collect()
            };
            let w_risky = DVector::from_column_slice(&risky[1..]);
            let realized_return = risky[1..].iter().zip(&next).map(|(w, r)| w * r).sum();
            let volatility = w_risky.dot(&(&reg_cov * &w_risky)).max(0.0).sqrt();
            let is_mv = spec.kind.is_mean_variance();
            out.push(DayOutcome {
                date_index: t,
                weights: risky,
                realized_return,
                volatility,
                lambda: if is_mv { ra.map(|r| r.lambda) } else { None },
                lambda_clamped: is_mv && ra.is_some_and(|r| r.clamped),
                inverse_floored,
            });
        }
        Ok(out)
    }
}

/// Walk-forward daily-rebalanced backtest.
///
/// For each decision day `t` in `[window − 1, n − 2]` the weights use only
/// days `t − window + 1 ..= t` (and the forecast of `t + 1` made from that
/// window); performance is the regular return of day `t + 1`.
pub fn run_backtest(
    universe: &UniverseData,
    cfg: &BacktestConfig,
    forecasts: &BacktestForecasts,
) -> Result<BacktestReport> {
    universe.validate()?;
    let specs = cfg.specs()?;
    if cfg.window < 2 {
        return Err(Error::InvalidInput(format!(
            "window {} is too short",
            cfg.window
        )));
    }
    if !(cfg.cap > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cap must be positive, got {}",
            cfg.cap
        )));
    }
    let n_days = universe.n_days();
    if n_days < cfg.window + 1 {
        return Err(Error::SeriesTooShort {
            needed: cfg.window + 1,
            got: n_days,
        });
    }
    let needs = |treated: bool| {
        specs
            .iter()
            .any(|s| s.basis == ReturnBasis::LiquidityAdjusted && s.uses_treated() == treated)
    };
    if specs.iter().any(|s| s.uses_treated()) && universe.treated.is_empty() {
        return Err(Error::InvalidInput(
            "selected portfolios need treated day records".into(),
        ));
    }
    let inputs = Inputs {
        universe,
        regular: universe.regular_returns(),
        treated_adj: if needs(true) {
            Some(universe.adjusted_returns(true)?)
        } else {
            None
        },
        untreated_adj: if needs(false) {
            Some(universe.adjusted_returns(false)?)
        } else {
            None
        },
        market: market_returns(universe),
        specs: specs.clone(),
        forecasts,
        cfg,
    };
    let days: Vec<Vec<DayOutcome>> = (cfg.window - 1..n_days - 1)
        .into_par_iter()
        .map(|t| inputs.day(t))
        .collect::<Result<_>>()?;

    let portfolios = specs
        .iter()
        .enumerate()
        .map(|(k, spec)| PortfolioReport::new(*spec, days.iter().map(|d| d[k].clone()).collect()))
        .collect();
    let mut assets = vec![super::portfolio::RISKFREE_ASSET.to_string()];
    assets.extend(universe.assets.iter().cloned());
    Ok(BacktestReport {
        window: cfg.window,
        assets,
        portfolios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(day: usize, r: f64, r_adj: f64, beta: f64, amount: f64) -> DailyRecord {
        DailyRecord {
            day_index: day,
            eta: 1.0,
            r_daily: r,
            r_daily_adj: r_adj,
            sigma_daily: 0.01,
            sigma_daily_adj: 0.01,
            beta_jump: beta,
            beta_diff: 1.0,
            amount,
            degenerate: false,
        }
    }

    fn universe(
        n_assets: usize,
        n_days: usize,
        f: impl Fn(usize, usize) -> (f64, f64),
    ) -> UniverseData {
        let rows: Vec<Vec<DailyRecord>> = (0..n_assets)
            .map(|a| {
                (0..n_days)
                    .map(|d| {
                        let (r, ra) = f(a, d);
                        record(d, r, ra, 1.0 + a as f64, 100.0 * (a + 1) as f64)
                    })
                    .collect()
            })
            .collect();
        UniverseData {
            assets: (0..n_assets).map(|a| format!("X{a}")).collect(),
            untreated: rows.clone(),
            treated: rows,
        }
    }

    fn noise(a: usize, d: usize) -> f64 {
        let x = ((a * 7919 + d * 104_729) % 1000) as f64 / 1000.0 - 0.5;
        0.01 * x + 0.0005
    }

    #[test]
    fn benchmark_rules() {
        let eq = benchmark_weights(PortfolioKind::Equal, &[1.0; 10], &[1.0; 10], 1e-6).unwrap();
        assert!(eq.weights.iter().all(|&w| w == 0.1));
        let lw = benchmark_weights(
            PortfolioKind::LiquidityWeight,
            &[1.0, 1.0],
            &[2.0, 1.0],
            1e-6,
        )
        .unwrap();
        assert!(
            (lw.weights[0] - 2.0 / 3.0).abs() < 1e-15 && (lw.weights[1] - 1.0 / 3.0).abs() < 1e-15
        );
        let iw = benchmark_weights(
            PortfolioKind::InverseLiquidityWeight,
            &[1.0, 1.0],
            &[2.0, 1.0],
            1e-6,
        )
        .unwrap();
        assert!(
            (iw.weights[0] - 1.0 / 3.0).abs() < 1e-15 && (iw.weights[1] - 2.0 / 3.0).abs() < 1e-15
        );
        let fl = benchmark_weights(
            PortfolioKind::InverseLiquidityWeight,
            &[1.0, 1.0],
            &[0.0, 1.0],
            1e-6,
        )
        .unwrap();
        assert!(fl.floored);
        let mk = benchmark_weights(PortfolioKind::Market, &[3.0, 1.0], &[1.0, 1.0], 1e-6).unwrap();
        assert_eq!(mk.weights, vec![0.75, 0.25]);
    }

    #[test]
    fn constant_returns_equal_portfolio() {
        let u = universe(3, 4, |_, _| (0.001, 0.001));
        let cfg = BacktestConfig {
            window: 2,
            portfolios: vec![1],
            ..BacktestConfig::default()
        };
        let rep = run_backtest(&u, &cfg, &BacktestForecasts::default()).unwrap();
        let p = &rep.portfolios[0];
        assert_eq!(p.days.len(), 2);
        for d in &p.days {
            assert!((d.realized_return - 0.001).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_weight_is_cross_sectional_mean() {
        let u = universe(10, 60, |a, d| (noise(a, d), noise(a, d)));
        let cfg = BacktestConfig {
            window: 20,
            portfolios: vec![1],
            ..BacktestConfig::default()
        };
        let rep = run_backtest(&u, &cfg, &BacktestForecasts::default()).unwrap();
        for d in &rep.portfolios[0].days {
            let m: f64 = (0..10)
                .map(|a| u.untreated[a][d.date_index + 1].r_daily)
                .sum::<f64>()
                / 10.0;
            assert!((d.realized_return - m).abs() <= 1e-12);
        }
    }

    #[test]
    fn liquidity_basis_only_changes_estimation_inputs() {
        let mut u = universe(4, 80, |a, d| (noise(a, d), noise(a, d)));
        let cfg = BacktestConfig {
            window: 30,
            portfolios: vec![7, 8],
            ..BacktestConfig::default()
        };
        let rep = run_backtest(&u, &cfg, &BacktestForecasts::default()).unwrap();
        for (a, b) in rep.portfolios[0].days.iter().zip(&rep.portfolios[1].days) {
            assert_eq!(a.weights, b.weights);
        }
        for a in 0..4 {
            for d in 0..80 {
                u.treated[a][d].r_daily_adj = noise(a + 5, d) * 0.3;
            }
        }
        let rep2 = run_backtest(&u, &cfg, &BacktestForecasts::default()).unwrap();
        assert_eq!(rep.portfolios[0].days, rep2.portfolios[0].days);
        assert_ne!(rep.portfolios[1].days, rep2.portfolios[1].days);
        for (p7, p8) in rep2.portfolios[0].days.iter().zip(&rep2.portfolios[1].days) {
            let w = &p8.weights[1..];
            let realized: f64 = w
                .iter()
                .enumerate()
                .map(|(i, w)| w * u.untreated[i][p8.date_index + 1].r_daily)
                .sum();
            assert!((p8.realized_return - realized).abs() < 1e-15);
            assert_eq!(p7.date_index, p8.date_index);
        }
    }

    #[test]
    fn weights_are_feasible_and_barrier_holds() {
        let u = universe(5, 70, |a, d| (noise(a, d), noise(a, d) * 0.8));
        let cfg = BacktestConfig {
            window: 30,
            portfolios: (1..=9).collect(),
            ..BacktestConfig::default()
        };
        let rep = run_backtest(&u, &cfg, &BacktestForecasts::default()).unwrap();
        for p in &rep.portfolios {
            for d in &p.days {
                assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(d.weights.iter().all(|&w| w >= -1e-12));
                if p.spec.kind.is_mean_variance() {
                    assert!(d.weights[1..].iter().all(|&w| w <= cfg.cap + 1e-12));
                }
            }
        }
        let mut perturbed = u.clone();
        let t = 45;
        for a in 0..5 {
            perturbed.untreated[a][t + 1].r_daily += 0.5;
            perturbed.treated[a][t + 1].r_daily_adj -= 0.3;
            perturbed.untreated[a][t + 1].beta_jump = 9.0;
        }
        let rep2 = run_backtest(&perturbed, &cfg, &BacktestForecasts::default()).unwrap();
        for (p, q) in rep.portfolios.iter().zip(&rep2.portfolios) {
            let k = t + 1 - cfg.window;
            assert_eq!(p.days[k].weights, q.days[k].weights);
        }
    }

    #[test]
    fn short_history_is_rejected() {
        let u = universe(2, 10, |a, d| (noise(a, d), noise(a, d)));
        let cfg = BacktestConfig {
            window: 10,
            portfolios: vec![1],
            ..BacktestConfig::default()
        };
        assert!(matches!(
            run_backtest(&u, &cfg, &BacktestForecasts::default()),
            Err(Error::SeriesTooShort {
                needed: 11,
                got: 10
            })
        ));
    }

    #[test]
    fn missing_forecasts_are_reported() {
        let u = universe(2, 40, |a, d| (noise(a, d), noise(a, d)));
        let cfg = BacktestConfig {
            window: 30,
            portfolios: vec![10],
            ..BacktestConfig::default()
        };
        assert!(run_backtest(&u, &cfg, &BacktestForecasts::default()).is_err());
    }
}
