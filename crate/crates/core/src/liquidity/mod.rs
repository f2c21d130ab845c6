//! Minute-level liquidity-adjusted returns, daily liquidity jump and
//! diffusion betas, and their descriptive statistics.

mod export;
mod measure;
mod summary;

pub use export::{beta_table_rows, read_beta_table_csv, write_beta_table_csv, BetaTableRow};
pub use measure::{
    classify_extreme, daily_aggregate, daily_betas, minute_liquidity, process_day, ratio_beta,
    weighted_adjusted_variance, Aggregation, DailyRecord, DayLiquidityRecord, ExtremeFlags,
    ExtremeThresholds, LiquidityConfig,
};
pub use summary::{beta_stats, BetaKind, BetaStats};

/// Default cap on daily betas.
pub const DEFAULT_CAP: f64 = 10.0;
