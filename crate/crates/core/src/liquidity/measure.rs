use serde::{Deserialize, Serialize};

use super::DEFAULT_CAP;
use crate::ingest::DayBars;

/// How minute returns are combined into a daily return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// First-order sum of minute returns.
    #[default]
    Sum,
    /// Compounded product `Π(1 + r) - 1`.
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeThresholds {
    pub jump: f64,
    pub diffusion: f64,
}

impl Default for ExtremeThresholds {
    fn default() -> Self {
        Self {
            jump: 4.0,
            diffusion: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityConfig {
    pub cap: f64,
    pub aggregation: Aggregation,
    pub extreme: ExtremeThresholds,
}

impl Default for LiquidityConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            aggregation: Aggregation::Sum,
            extreme: ExtremeThresholds::default(),
        }
    }
}

/// Full liquidity record of one asset-day, minute detail included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayLiquidityRecord {
    pub day_index: usize,
    pub eta: f64,
    /// Minute returns `r_t` as observed.
    pub r: Vec<f64>,
    /// `(|r_t| / mean|r|) / (A_t / mean A)` on contributing minutes, 0 elsewhere.
    pub premium_ratio: Vec<f64>,
    pub contributing: Vec<bool>,
    pub r_adj: Vec<f64>,
    pub beta_minute: Vec<f64>,
    pub r_daily: f64,
    pub r_daily_adj: f64,
    pub sigma_daily: f64,
    pub sigma_daily_adj: f64,
    pub beta_jump: f64,
    pub beta_diff: f64,
    /// Total traded amount of the day.
    pub amount: f64,
    /// No contributing minute: all minute betas are 1.
    pub degenerate: bool,
}

impl DayLiquidityRecord {
    pub fn contributing_count(&self) -> usize {
        self.contributing.iter().filter(|&&c| c).count()
    }

    /// Drops the minute vectors.
    pub fn daily(&self) -> DailyRecord {
        DailyRecord {
            day_index: self.day_index,
            eta: self.eta,
            r_daily: self.r_daily,
            r_daily_adj: self.r_daily_adj,
            sigma_daily: self.sigma_daily,
            sigma_daily_adj: self.sigma_daily_adj,
            beta_jump: self.beta_jump,
            beta_diff: self.beta_diff,
            amount: self.amount,
            degenerate: self.degenerate,
        }
    }
}

/// Daily fields of a [`DayLiquidityRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub day_index: usize,
    pub eta: f64,
    pub r_daily: f64,
    pub r_daily_adj: f64,
    pub sigma_daily: f64,
    pub sigma_daily_adj: f64,
    pub beta_jump: f64,
    pub beta_diff: f64,
    pub amount: f64,
    pub degenerate: bool,
}

/// Computes `η`, premium ratios, `r^ℓ` and minute betas.
///
/// A minute contributes when it traded, moved and carried a positive
/// amount; other minutes keep `r^ℓ = r` and `β = 1`. The daily fields are
/// left at zero.
pub fn minute_liquidity(day: &DayBars) -> DayLiquidityRecord {
    let t = day.bars.len();
    let r: Vec<f64> = day.returns();
    let contributing: Vec<bool> = day
        .bars
        .iter()
        .map(|b| b.trade_count > 0 && b.r != 0.0 && b.amount > 0.0)
        .collect();
    let n = contributing.iter().filter(|&&c| c).count();

    let mut premium_ratio = vec![0.0; t];
    let mut r_adj = r.clone();
    let mut beta_minute = vec![1.0; t];
    let mut eta = 1.0;
    if n > 0 {
        let (mut sum_abs, mut sum_amt) = (0.0, 0.0);
        for (b, _) in day.bars.iter().zip(&contributing).filter(|(_, &c)| c) {
            sum_abs += b.r.abs();
            sum_amt += b.amount;
        }
        let mean_abs = sum_abs / n as f64;
        let mean_amt = sum_amt / n as f64;
        let mut ratio_sum = 0.0;
        for (m, b) in day.bars.iter().enumerate() {
            if contributing[m] {
                premium_ratio[m] = (b.r.abs() / mean_abs) / (b.amount / mean_amt);
                ratio_sum += premium_ratio[m];
            }
        }
        eta = n as f64 / ratio_sum;
        for m in 0..t {
            if contributing[m] {
                let k = (eta * premium_ratio[m]).sqrt();
                r_adj[m] = k * r[m];
                beta_minute[m] = 1.0 / k;
            }
        }
    }

    DayLiquidityRecord {
        day_index: day.day_index,
        eta,
        r,
        premium_ratio,
        contributing,
        r_adj,
        beta_minute,
        r_daily: 0.0,
        r_daily_adj: 0.0,
        sigma_daily: 0.0,
        sigma_daily_adj: 0.0,
        beta_jump: 1.0,
        beta_diff: 1.0,
        amount: day.total_amount(),
        degenerate: n == 0,
    }
}

fn aggregate(r: &[f64], how: Aggregation) -> f64 {
    match how {
        Aggregation::Sum => r.iter().sum(),
        Aggregation::Compound => r.iter().fold(1.0, |acc, x| acc * (1.0 + x)) - 1.0,
    }
}

/// `T × mean (x − x̄)²` over all minutes.
fn realized_variance(x: &[f64]) -> f64 {
    let t = x.len() as f64;
    let mean = x.iter().sum::<f64>() / t;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
}

/// Fills daily returns and volatilities from the minute fields.
pub fn daily_aggregate(record: &mut DayLiquidityRecord, how: Aggregation) {
    record.r_daily = aggregate(&record.r, how);
    record.r_daily_adj = aggregate(&record.r_adj, how);
    record.sigma_daily = realized_variance(&record.r).sqrt();
    record.sigma_daily_adj = realized_variance(&record.r_adj).sqrt();
}

/// The weighted expression `T × mean η·ratio_t·(r_t − r̄)²`, with weight 1 on
/// non-contributing minutes. It coincides with the variance of `r^ℓ` when
/// both `r` and `r^ℓ` average to zero over the day.
pub fn weighted_adjusted_variance(record: &DayLiquidityRecord) -> f64 {
    let t = record.r.len() as f64;
    let mean = record.r.iter().sum::<f64>() / t;
    record
        .r
        .iter()
        .enumerate()
        .map(|(m, &x)| {
            let k = if record.contributing[m] {
                record.eta * record.premium_ratio[m]
            } else {
                1.0
            };
            k * (x - mean) * (x - mean)
        })
        .sum()
}

/// `min(|num / den|, cap)` with `0/0 → 1` and `x/0 → cap`.
pub fn ratio_beta(num: f64, den: f64, cap: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            cap
        }
    } else {
        (num / den).abs().min(cap)
    }
}

/// Liquidity jump and diffusion betas of a day.
pub fn daily_betas(record: &DayLiquidityRecord, cap: f64) -> (f64, f64) {
    if record.degenerate {
        return (1.0, 1.0);
    }
    (
        ratio_beta(record.r_daily, record.r_daily_adj, cap),
        ratio_beta(record.sigma_daily, record.sigma_daily_adj, cap),
    )
}

/// Runs minute measures, daily aggregation and betas for one day.
pub fn process_day(day: &DayBars, cfg: &LiquidityConfig) -> DayLiquidityRecord {
    let mut rec = minute_liquidity(day);
    daily_aggregate(&mut rec, cfg.aggregation);
    let (bj, bd) = daily_betas(&rec, cfg.cap);
    rec.beta_jump = bj;
    rec.beta_diff = bd;
    rec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtremeFlags {
    pub extreme_jump: bool,
    pub extreme_diffusion: bool,
}

/// Flags days whose betas reach the extremeness thresholds (inclusive).
pub fn classify_extreme(
    beta_jump: f64,
    beta_diff: f64,
    thresholds: &ExtremeThresholds,
) -> ExtremeFlags {
    ExtremeFlags {
        extreme_jump: beta_jump >= thresholds.jump,
        extreme_diffusion: beta_diff >= thresholds.diffusion,
    }
}
