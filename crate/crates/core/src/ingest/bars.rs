use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ticks::TradeTick;
use super::{MS_PER_DAY, MS_PER_MINUTE};
use crate::error::{Error, Result};

/// Minutes per asset-day (`T`).
pub const MINUTES_PER_DAY: usize = 1440;

/// One minute of aggregated trading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub day_index: usize,
    pub minute_index: usize,
    /// Last trade price, carried forward; zero before the first trade when
    /// no seed price was supplied.
    pub close_price: f64,
    pub r: f64,
    pub amount: f64,
    pub trade_count: u32,
}

/// The 1440 bars of one asset-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayBars {
    pub day_index: usize,
    pub bars: Vec<MinuteBar>,
    /// Set once the wash treatment has been applied.
    pub treated: bool,
}

impl DayBars {
    pub fn returns(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.r).collect()
    }

    pub fn amounts(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.amount).collect()
    }

    pub fn total_amount(&self) -> f64 {
        self.bars.iter().map(|b| b.amount).sum()
    }

    /// Closing price of the day (last carried close).
    pub fn last_close(&self) -> f64 {
        self.bars.last().map_or(0.0, |b| b.close_price)
    }

    /// Builds a day directly from minute returns, amounts and trade counts.
    /// Close prices are compounded from 1.
    pub fn from_minutes(
        day_index: usize,
        r: &[f64],
        amount: &[f64],
        trades: &[u32],
    ) -> Result<Self> {
        if r.len() != amount.len() || r.len() != trades.len() {
            return Err(Error::InvalidInput(
                "minute vectors differ in length".into(),
            ));
        }
        let mut close = 1.0;
        let bars = r
            .iter()
            .zip(amount)
            .zip(trades)
            .enumerate()
            .map(|(m, ((&r, &a), &n))| {
                close *= 1.0 + r;
                MinuteBar {
                    day_index,
                    minute_index: m,
                    close_price: close,
                    r,
                    amount: a,
                    trade_count: n,
                }
            })
            .collect();
        Ok(Self {
            day_index,
            bars,
            treated: false,
        })
    }
}

/// Aggregates one day of ticks into 1440 minute bars.
///
/// `seed_price` is the prior day's close; when absent the first trade's
/// price is used, so the first traded minute starts from its own open.
pub fn build_minute_bars(
    ticks: &[TradeTick],
    day_start: i64,
    day_index: usize,
    seed_price: Option<f64>,
) -> Result<DayBars> {
    let seed = match (seed_price, ticks.first()) {
        (Some(p), _) if p > 0.0 && p.is_finite() => Some(p),
        (Some(p), _) => {
            return Err(Error::InvalidInput(format!(
                "seed price {p} is not positive"
            )))
        }
        (None, Some(t)) => Some(t.price),
        (None, None) => None,
    };
    let Some(seed) = seed else {
        return Err(Error::NoPriceBasis);
    };

    let mut last_price = vec![f64::NAN; MINUTES_PER_DAY];
    let mut amount = vec![0.0; MINUTES_PER_DAY];
    let mut count = vec![0u32; MINUTES_PER_DAY];
    let mut prev_ts = i64::MIN;
    for t in ticks {
        let offset = t.timestamp_ms - day_start;
        if !(0..MS_PER_DAY).contains(&offset) {
            return Err(Error::TickOutsideDay {
                timestamp: t.timestamp_ms,
                day_start,
            });
        }
        if t.timestamp_ms < prev_ts {
            return Err(Error::InvalidInput("ticks not sorted by timestamp".into()));
        }
        prev_ts = t.timestamp_ms;
        let m = (offset / MS_PER_MINUTE) as usize;
        last_price[m] = t.price;
        amount[m] += t.quote_amount;
        count[m] += 1;
    }

    let mut prev = seed;
    let mut carried = seed_price.unwrap_or(0.0);
    let bars = (0..MINUTES_PER_DAY)
        .map(|m| {
            let r = if count[m] > 0 {
                let close = last_price[m];
                let r = close / prev - 1.0;
                prev = close;
                carried = close;
                r
            } else {
                0.0
            };
            MinuteBar {
                day_index,
                minute_index: m,
                close_price: carried,
                r,
                amount: amount[m],
                trade_count: count[m],
            }
        })
        .collect();
    Ok(DayBars {
        day_index,
        bars,
        treated: false,
    })
}

/// Writes bars as `day_index,minute_index,close,r,amount,trades`.
pub fn write_minute_bars_csv<W: Write>(out: W, days: &[DayBars], with_header: bool) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    if with_header {
        writeln!(w, "day_index,minute_index,close,r,amount,trades")?;
    }
    for day in days {
        for b in &day.bars {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                b.day_index, b.minute_index, b.close_price, b.r, b.amount, b.trade_count
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
