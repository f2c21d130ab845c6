//! Ticks to minute bars to treated and untreated day records, for one day,
//! a directory of tick files or a generated market.

use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::UniverseData;
use crate::error::{Error, Result};
use crate::ingest::{
    apply_wash_treatment, build_minute_bars, read_tick_file, DayBars, TradeTick, TreatmentOutcome,
    TreatmentSpec, MS_PER_DAY, MS_PER_MINUTE,
};
use crate::liquidity::{process_day, DailyRecord, DayLiquidityRecord, LiquidityConfig};
use crate::synth::{generate_asset, SynthSpec, WashRecord};

/// Which treatment branches to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branches {
    /// Treated records only.
    On,
    /// Untreated records only.
    Off,
    #[default]
    Both,
}

impl Branches {
    pub fn treated(self) -> bool {
        self != Self::Off
    }

    pub fn untreated(self) -> bool {
        self != Self::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub liquidity: LiquidityConfig,
    pub treatment: TreatmentSpec,
}

/// Bars and liquidity records of one asset-day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayOutput {
    pub bars: DayBars,
    pub untreated: DayLiquidityRecord,
    pub treated_bars: DayBars,
    pub treated: DayLiquidityRecord,
    pub treatment: TreatmentOutcome,
}

/// Runs ingest, treatment and liquidity for one day of ticks.
pub fn process_ticks(
    ticks: &[TradeTick],
    day_start: i64,
    day_index: usize,
    seed_price: Option<f64>,
    cfg: &PipelineConfig,
) -> Result<DayOutput> {
    let bars = build_minute_bars(ticks, day_start, day_index, seed_price)?;
    let (treated_bars, treatment) = apply_wash_treatment(&bars, &cfg.treatment)?;
    if let TreatmentOutcome::Degenerate { positive_minutes } = treatment {
        log::warn!("day {day_index}: only {positive_minutes} minutes with positive amount, treatment skipped");
    }
    Ok(DayOutput {
        untreated: process_day(&bars, &cfg.liquidity),
        treated: process_day(&treated_bars, &cfg.liquidity),
        bars,
        treated_bars,
        treatment,
    })
}

/// Injected versus treatment-removed wash volume.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WashAccounting {
    pub injected: f64,
    pub removed: f64,
}

impl WashAccounting {
    pub fn removed_share(&self) -> f64 {
        if self.injected > 0.0 {
            self.removed / self.injected
        } else {
            0.0
        }
    }

    fn add(&mut self, other: Self) {
        self.injected += other.injected;
        self.removed += other.removed;
    }
}

/// Attributes the treatment's amount reduction in each minute to the
/// injected trades of that minute pro rata.
pub fn wash_removed(day: &DayOutput, wash: &[WashRecord], day_start: i64) -> WashAccounting {
    let mut acc = WashAccounting::default();
    for w in wash {
        let m = ((w.timestamp_ms - day_start) / MS_PER_MINUTE) as usize;
        let before = day.bars.bars[m].amount;
        let after = day.treated_bars.bars[m].amount;
        let kept = if before > 0.0 { after / before } else { 1.0 };
        acc.injected += w.quote_amount;
        acc.removed += w.quote_amount * (1.0 - kept);
    }
    acc
}

/// Day records of a generated market plus wash accounting per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthUniverse {
    pub universe: UniverseData,
    pub wash: Vec<WashAccounting>,
}

/// Generates `spec` in memory and reduces it to day records, assets in
/// parallel.
pub fn universe_from_synth(spec: &SynthSpec, cfg: &PipelineConfig) -> Result<SynthUniverse> {
    spec.validate()?;
    let per_asset: Vec<(Vec<DailyRecord>, Vec<DailyRecord>, WashAccounting)> = (0..spec.n_assets)
        .into_par_iter()
        .map(|asset| {
            let mut untreated = Vec::with_capacity(spec.n_days);
            let mut treated = Vec::with_capacity(spec.n_days);
            let mut acc = WashAccounting::default();
            let mut seed = None;
            generate_asset(spec, asset, |d| {
                let out = process_ticks(&d.ticks, d.day_start_ms, d.day_index, seed, cfg)?;
                acc.add(wash_removed(&out, &d.wash, d.day_start_ms));
                seed = Some(out.bars.last_close());
                untreated.push(out.untreated.daily());
                treated.push(out.treated.daily());
                Ok(())
            })?;
            Ok((untreated, treated, acc))
        })
        .collect::<Result<_>>()?;
    let mut universe = UniverseData {
        assets: (0..spec.n_assets).map(|a| spec.asset_name(a)).collect(),
        untreated: Vec::new(),
        treated: Vec::new(),
    };
    let mut wash = Vec::new();
    for (u, t, w) in per_asset {
        universe.untreated.push(u);
        universe.treated.push(t);
        wash.push(w);
    }
    Ok(SynthUniverse { universe, wash })
}

/// Path of the tick file for `asset` and `day` under `dir`.
pub fn tick_file_path(dir: &Path, asset: &str, day: usize) -> std::path::PathBuf {
    dir.join(asset).join(format!("{day:05}.csv"))
}

/// Full records of one asset read from `{dir}/{asset}/{day:05}.csv`.
pub fn asset_from_dir(
    dir: &Path,
    asset: &str,
    days: Range<usize>,
    start_ms: i64,
    cfg: &PipelineConfig,
) -> Result<Vec<(DayLiquidityRecord, DayLiquidityRecord)>> {
    let mut seed = None;
    let mut out = Vec::with_capacity(days.len());
    for day in days {
        let path = tick_file_path(dir, asset, day);
        if !path.is_file() {
            return Err(Error::MissingDay {
                day,
                what: format!("tick file {} not found", path.display()),
            });
        }
        let in_file = |e: Error| Error::InFile {
            path: path.display().to_string(),
            source: Box::new(e),
        };
        let parsed = read_tick_file(&path).map_err(in_file)?;
        if parsed.rejected > 0 {
            log::warn!(
                "{}: {} malformed lines skipped",
                path.display(),
                parsed.rejected
            );
        }
        let day_start = start_ms + day as i64 * MS_PER_DAY;
        let o = process_ticks(&parsed.ticks, day_start, day, seed, cfg).map_err(in_file)?;
        seed = Some(o.bars.last_close());
        out.push((o.untreated, o.treated));
    }
    Ok(out)
}

/// Day records for `assets` over `days` read from tick files, assets in
/// parallel. Day indices are renumbered from zero.
pub fn universe_from_dir(
    dir: &Path,
    assets: &[String],
    days: Range<usize>,
    start_ms: i64,
    cfg: &PipelineConfig,
) -> Result<UniverseData> {
    if assets.is_empty() {
        return Err(Error::InvalidInput("asset list is empty".into()));
    }
    let first = days.start;
    let per_asset: Vec<Vec<(DayLiquidityRecord, DayLiquidityRecord)>> = assets
        .par_iter()
        .map(|a| asset_from_dir(dir, a, days.clone(), start_ms, cfg))
        .collect::<Result<_>>()?;
    let strip = |r: &DayLiquidityRecord| DailyRecord {
        day_index: r.day_index - first,
        ..r.daily()
    };
    Ok(UniverseData {
        assets: assets.to_vec(),
        untreated: per_asset
            .iter()
            .map(|v| v.iter().map(|(u, _)| strip(u)).collect())
            .collect(),
        treated: per_asset
            .iter()
            .map(|v| v.iter().map(|(_, t)| strip(t)).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_market, WashMode};

    #[test]
    fn files_and_memory_agree() {
        let mut spec = SynthSpec {
            n_assets: 2,
            n_days: 3,
            ..SynthSpec::default()
        };
        spec.wash.mode = WashMode::HfSmall;
        let dir = std::env::temp_dir().join(format!("liqjump-pipeline-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        generate_market(&spec, &dir).unwrap();
        let cfg = PipelineConfig::default();
        let from_files = universe_from_dir(
            &dir,
            &[spec.asset_name(0), spec.asset_name(1)],
            0..3,
            spec.start_ms,
            &cfg,
        )
        .unwrap();
        let mem = universe_from_synth(&spec, &cfg).unwrap();
        assert_eq!(from_files, mem.universe);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = std::env::temp_dir().join("liqjump-pipeline-missing");
        let err = universe_from_dir(&dir, &["NOPE".into()], 0..1, 0, &PipelineConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("00000.csv"));
    }

    #[test]
    fn treatment_removes_most_hf_wash_volume() {
        let mut spec = SynthSpec {
            n_assets: 1,
            n_days: 5,
            ..SynthSpec::default()
        };
        spec.wash.mode = WashMode::HfSmall;
        let u = universe_from_synth(&spec, &PipelineConfig::default()).unwrap();
        assert!(u.wash[0].injected > 0.0);
        assert!(u.wash[0].removed_share() >= 0.5, "{:?}", u.wash[0]);
    }
}
