use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::engine::DayOutcome;
use super::portfolio::PortfolioSpec;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

/// Trading days per year (crypto markets trade every day).
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sharpe {
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    pub sharpe: f64,
}

/// `mean × 365 / (sample std × √365)` with a zero risk-free rate.
pub fn sharpe_annualized(daily_returns: &[f64]) -> Result<Sharpe> {
    if daily_returns.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: daily_returns.len(),
        });
    }
    let m = mean(daily_returns);
    let s = sample_std(daily_returns);
    if !(s > 1e-14 * m.abs()) {
        return Err(Error::ZeroVariance);
    }
    let annualized_return = m * DAYS_PER_YEAR;
    let annualized_volatility = s * DAYS_PER_YEAR.sqrt();
    Ok(Sharpe {
        annualized_return,
        annualized_volatility,
        sharpe: annualized_return / annualized_volatility,
    })
}

/// Daily history and metrics of one portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub spec: PortfolioSpec,
    pub days: Vec<DayOutcome>,
    pub max_daily_return: f64,
    pub max_daily_volatility: f64,
    /// `None` when the realized returns have zero variance.
    pub sharpe: Option<Sharpe>,
    pub lambda_clamped_days: usize,
    pub inverse_floored_days: usize,
}

impl PortfolioReport {
    pub fn new(spec: PortfolioSpec, days: Vec<DayOutcome>) -> Self {
        let returns: Vec<f64> = days.iter().map(|d| d.realized_return).collect();
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
        Self {
            spec,
            max_daily_return: max(&mut returns.iter().copied()),
            max_daily_volatility: max(&mut days.iter().map(|d| d.volatility)),
            sharpe: sharpe_annualized(&returns).ok(),
            lambda_clamped_days: days.iter().filter(|d| d.lambda_clamped).count(),
            inverse_floored_days: days.iter().filter(|d| d.inverse_floored).count(),
            days,
        }
    }

    pub fn returns(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.realized_return).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub window: usize,
    /// Weight order of every [`DayOutcome`]: risk-free asset first.
    pub assets: Vec<String>,
    pub portfolios: Vec<PortfolioReport>,
}

impl BacktestReport {
    pub fn portfolio(&self, id: u8) -> Option<&PortfolioReport> {
        self.portfolios.iter().find(|p| p.spec.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Column {
    pub id: u8,
    pub label: String,
    pub max_daily_return: f64,
    pub max_daily_volatility: f64,
    pub sharpe: Option<f64>,
}

/// Max daily return, max daily volatility and annualized Sharpe ratio per
/// portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Summary {
    /// Volatilities were multiplied by `√365`.
    pub annualized_volatility: bool,
    pub columns: Vec<Table3Column>,
}

pub fn table3_summary(report: &BacktestReport, annualize_volatility: bool) -> Table3Summary {
    let scale = if annualize_volatility {
        DAYS_PER_YEAR.sqrt()
    } else {
        1.0
    };
    Table3Summary {
        annualized_volatility: annualize_volatility,
        columns: report
            .portfolios
            .iter()
            .map(|p| Table3Column {
                id: p.spec.id,
                label: p.spec.label().to_string(),
                max_daily_return: p.max_daily_return,
                max_daily_volatility: p.max_daily_volatility * scale,
                sharpe: p.sharpe.map(|s| s.sharpe),
            })
            .collect(),
    }
}

impl Table3Summary {
    /// Panels A (max daily return), B (max daily volatility) and C (Sharpe),
    /// each split into benchmark portfolios and a standard/forecast by
    /// TMV/LAMV grid of mean-variance portfolios.
    pub fn to_json(&self) -> Value {
        let panel = |f: &dyn Fn(&Table3Column) -> Value| {
            let mut bench = Map::new();
            let mut standard = Map::new();
            let mut forecast = Map::new();
            for c in &self.columns {
                let key = format!("{}", c.id);
                let col = match c.id {
                    7 | 10 => "TMV",
                    8 | 11 => "LAMV_treated",
                    9 | 12 => "LAMV_untreated",
                    _ => "",
                };
                let entry = json!({ "portfolio": c.id, "label": c.label, "value": f(c) });
                match c.id {
                    1..=6 => {
                        bench.insert(key, entry);
                    }
                    7..=9 => {
                        standard.insert(col.into(), entry);
                    }
                    _ => {
                        forecast.insert(col.into(), entry);
                    }
                }
            }
            json!({ "benchmark": bench, "mv_standard": standard, "mv_forecast": forecast })
        };
        json!({
            "annualized_volatility": self.annualized_volatility,
            "panel_a_max_daily_return": panel(&|c| json!(c.max_daily_return)),
            "panel_b_max_daily_volatility": panel(&|c| json!(c.max_daily_volatility)),
            "panel_c_sharpe_ratio": panel(&|c| json!(c.sharpe)),
        })
    }
}

/// Writes `date_index,portfolio_id,return,volatility`; `date_index` is the
/// realized day `t + 1`.
pub fn write_returns_csv<W: Write>(out: W, report: &BacktestReport) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "date_index,portfolio_id,return,volatility")?;
    for p in &report.portfolios {
        for d in &p.days {
            writeln!(
                w,
                "{},{},{},{}",
                d.date_index + 1,
                p.spec.id,
                d.realized_return,
                d.volatility
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `date_index,portfolio_id,asset,weight`; `date_index` is the
/// decision day `t`.
pub fn write_weights_csv<W: Write>(out: W, report: &BacktestReport) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "date_index,portfolio_id,asset,weight")?;
    for p in &report.portfolios {
        for d in &p.days {
            for (asset, weight) in report.assets.iter().zip(&d.weights) {
                writeln!(w, "{},{},{},{}", d.date_index, p.spec.id, asset, weight)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
