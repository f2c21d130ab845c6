//! Benchmark and mean-variance portfolios, the walk-forward backtest and
//! its summary metrics.

mod engine;
mod portfolio;
mod report;

pub use engine::{
    benchmark_weights, compute_forecasts, market_returns, run_backtest, BacktestConfig,
    BacktestForecasts, BenchmarkWeights, DayOutcome, UniverseData,
};
pub use portfolio::{
    parse_portfolio_list, PortfolioKind, PortfolioSpec, ReturnBasis, Treatment, RISKFREE_ASSET,
};
pub use report::{
    sharpe_annualized, table3_summary, write_returns_csv, write_weights_csv, BacktestReport,
    PortfolioReport, Sharpe, Table3Column, Table3Summary, DAYS_PER_YEAR,
};
