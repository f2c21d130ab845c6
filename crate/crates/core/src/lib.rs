//! Liquidity-adjusted return measures, wash-trade treatment, ARMA-GARCH
//! forecasting and mean-variance backtesting on minute-level crypto data.

pub mod backtest;
pub mod error;
pub mod ingest;
pub mod liquidity;
pub mod optimizer;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod tsmodel;

pub use backtest::{BacktestConfig, BacktestReport, PortfolioSpec, UniverseData};
pub use error::{Error, Result};
pub use ingest::{DayBars, MinuteBar, TradeTick, TreatmentSpec};
pub use liquidity::{BetaStats, DailyRecord, DayLiquidityRecord};
pub use nalgebra;
pub use optimizer::{MvProblem, MvSolution};
pub use synth::{SynthSpec, WashMode, WashSpec};
