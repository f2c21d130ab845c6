//! Deterministic synthetic tick data with jump and wash-trade regimes.
//!
//! Random numbers come from ChaCha8 with the key derived from the run seed
//! (`seed_from_u64`) and the 64-bit stream id
//! `asset << 40 | day << 8 | purpose`, so every asset-day-purpose triple
//! has its own counter-based stream and generation order never matters.

mod market;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use market::{
    generate_asset, generate_market, inject_wash_trades, stream_rng, AssetDay, Purpose, WashRecord,
    WASH_TRUTH_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WashMode {
    #[default]
    None,
    /// Bursts of many small self-matched trades that push the minute close
    /// away and back.
    HfSmall,
    /// A few very large trades at the prevailing price.
    Whale,
}

impl WashMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::HfSmall => "hf_small",
            Self::Whale => "whale",
        }
    }
}

/// Wash-trade injection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WashSpec {
    pub mode: WashMode,
    /// Expected bursts per asset-day (`hf_small`).
    pub burst_rate: f64,
    /// Displacement of the burst close, in minute volatilities.
    pub burst_displacement: f64,
    /// Wash volume per burst minute, in multiples of the base minute amount.
    pub burst_volume_multiple: f64,
    /// Wash trades per burst minute.
    pub burst_trades: usize,
    /// Expected whale trades per asset-day (`whale`).
    pub whale_rate: f64,
    /// Whale trade size in multiples of the base minute amount.
    pub whale_volume_multiple: f64,
}

impl Default for WashSpec {
    fn default() -> Self {
        Self {
            mode: WashMode::None,
            burst_rate: 25.0,
            burst_displacement: 4.0,
            burst_volume_multiple: 50.0,
            burst_trades: 12,
            whale_rate: 3.0,
            whale_volume_multiple: 30.0,
        }
    }
}

/// Full description of a synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_assets: usize,
    pub n_days: usize,
    /// Timestamp of the first day's midnight (ms since epoch, UTC).
    pub start_ms: i64,
    /// Starting price per asset; missing entries use `100 × (i + 1)`.
    pub base_prices: Vec<f64>,
    /// Standard deviation of diffusive log returns per minute.
    pub minute_vol: f64,
    /// Long-run mean diffusive log return per day.
    pub daily_drift: f64,
    /// Loading of today's drift on yesterday's diffusive return.
    pub momentum: f64,
    /// Floor of the activity multiplier; smaller values couple volume more
    /// tightly to absolute returns.
    pub activity_base: f64,
    /// Mean genuine trades per minute.
    pub trade_rate: f64,
    /// Mean genuine quote amount per minute.
    pub base_amount: f64,
    /// Log-normal dispersion of minute amounts.
    pub amount_sigma: f64,
    /// Log-normal price noise of individual trades.
    pub micro_noise: f64,
    /// Expected jumps per asset-day.
    pub jump_intensity: f64,
    pub jump_mean: f64,
    pub jump_sd: f64,
    /// Activity added per unit of `|jump| / minute_vol`.
    pub jump_activity: f64,
    /// Number of leading assets with jumps; `None` gives every asset jumps.
    pub jumpy_assets: Option<usize>,
    /// Subtract the expected jump return from the drift of jumpy assets.
    pub compensate_jumps: bool,
    pub wash: WashSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            n_assets: 10,
            n_days: 30,
            start_ms: 1_577_836_800_000,
            base_prices: Vec::new(),
            minute_vol: 0.001,
            daily_drift: 0.0,
            momentum: 0.0,
            activity_base: 0.3,
            trade_rate: 5.0,
            base_amount: 1000.0,
            amount_sigma: 0.05,
            micro_noise: 2e-5,
            jump_intensity: 0.0,
            jump_mean: 0.08,
            jump_sd: 0.04,
            jump_activity: 20.0,
            jumpy_assets: None,
            compensate_jumps: false,
            wash: WashSpec::default(),
        }
    }
}

impl SynthSpec {
    /// Named scenarios: `clean`, `hf_small`, `whale`, `jump_heavy`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        Ok(match name {
            "clean" => base,
            "hf_small" => Self {
                n_days: 400,
                wash: WashSpec {
                    mode: WashMode::HfSmall,
                    ..WashSpec::default()
                },
                ..base
            },
            "whale" => Self {
                n_days: 400,
                wash: WashSpec {
                    mode: WashMode::Whale,
                    ..WashSpec::default()
                },
                ..base
            },
            "jump_heavy" => Self {
                n_days: 865,
                trade_rate: 2.0,
                daily_drift: 0.0015,
                momentum: 0.15,
                jump_intensity: 0.05,
                jump_mean: 0.25,
                jump_sd: 0.1,
                jumpy_assets: Some(5),
                compensate_jumps: true,
                ..base
            },
            other => return Err(Error::InvalidInput(format!("unknown scenario '{other}'"))),
        })
    }

    pub fn asset_name(&self, asset: usize) -> String {
        format!("SYN{asset:02}")
    }

    pub fn base_price(&self, asset: usize) -> f64 {
        self.base_prices
            .get(asset)
            .copied()
            .unwrap_or(100.0 * (asset + 1) as f64)
    }

    pub fn has_jumps(&self, asset: usize) -> bool {
        self.jump_intensity > 0.0 && self.jumpy_assets.is_none_or(|k| asset < k)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.minute_vol,
            self.activity_base,
            self.trade_rate,
            self.base_amount,
            self.amount_sigma,
            self.micro_noise,
            self.jump_intensity,
            self.jump_sd,
            self.jump_activity,
            self.wash.burst_rate,
            self.wash.burst_displacement,
            self.wash.burst_volume_multiple,
            self.wash.whale_rate,
            self.wash.whale_volume_multiple,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidInput(
                "synthetic rates and scales must be finite and non-negative".into(),
            ));
        }
        if self.n_assets == 0 {
            return Err(Error::InvalidInput("asset list is empty".into()));
        }
        if self.n_assets >= 1 << 24 || self.n_days >= 1 << 32 {
            return Err(Error::InvalidInput(
                "too many assets or days for the stream layout".into(),
            ));
        }
        if self
            .base_prices
            .iter()
            .any(|p| !(p.is_finite() && *p > 0.0))
        {
            return Err(Error::InvalidInput("base prices must be positive".into()));
        }
        if self.activity_base + 1.0 <= 0.0 || self.trade_rate == 0.0 || self.base_amount == 0.0 {
            return Err(Error::InvalidInput(
                "trade rate and base amount must be positive".into(),
            ));
        }
        Ok(())
    }
}
