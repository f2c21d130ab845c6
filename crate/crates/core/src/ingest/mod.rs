//! Tick parsing, minute-bar aggregation and the quantile wash-trade treatment.

mod bars;
mod ticks;
mod treatment;

pub use bars::{build_minute_bars, write_minute_bars_csv, DayBars, MinuteBar, MINUTES_PER_DAY};
pub use ticks::{
    parse_ticks, read_tick_file, write_ticks_csv, HeaderMode, ParsedTicks, TickField, TickSchema,
    TradeTick,
};
pub use treatment::{apply_wash_treatment, TreatmentOutcome, TreatmentSpec};

/// Milliseconds in one UTC day.
pub const MS_PER_DAY: i64 = 86_400_000;
/// Milliseconds in one minute.
pub const MS_PER_MINUTE: i64 = 60_000;
