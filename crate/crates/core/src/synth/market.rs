use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson, StandardNormal};
use rayon::prelude::*;

use super::{SynthSpec, WashMode};
use crate::error::{Error, Result};
use crate::ingest::{write_ticks_csv, TradeTick, MINUTES_PER_DAY, MS_PER_DAY, MS_PER_MINUTE};

/// Sidecar file listing every injected trade of an asset.
pub const WASH_TRUTH_FILE: &str = "wash_truth.csv";

/// Random stream selector within an asset-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Price = 1,
    Trades = 2,
    Wash = 3,
}

/// ChaCha8 stream for one asset-day-purpose triple.
pub fn stream_rng(seed: u64, asset: usize, day: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((asset as u64) << 40) | ((day as u64) << 8) | purpose as u64);
    rng
}

/// One injected trade as recorded in the ground-truth sidecar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WashRecord {
    pub timestamp_ms: i64,
    pub quote_amount: f64,
    pub mode: WashMode,
}

/// Generated ticks of one asset-day.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetDay {
    pub asset: usize,
    pub day_index: usize,
    pub day_start_ms: i64,
    /// Genuine and injected trades, sorted by timestamp.
    pub ticks: Vec<TradeTick>,
    pub wash: Vec<WashRecord>,
    /// Sum of jump log returns of the day.
    pub jump_return: f64,
    /// Log return of the latent price excluding jumps.
    pub diffusive_return: f64,
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("positive finite rate");
    let k: f64 = d.sample(rng);
    k as usize
}

/// Splits `total` into `n` positive shares with exponential weights.
fn split_amount<R: Rng>(rng: &mut R, total: f64, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n)
        .map(|_| Exp1.sample(rng))
        .map(|x: f64| x + 1e-3)
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| total * x / s).collect()
}

fn tick(timestamp_ms: i64, price: f64, quote: f64) -> TradeTick {
    TradeTick {
        timestamp_ms,
        price,
        base_qty: quote / price,
        quote_amount: quote,
    }
}

struct Latent {
    log_close: Vec<f64>,
    activity: Vec<f64>,
    jump_return: f64,
    diffusive_return: f64,
}

fn latent_path(spec: &SynthSpec, asset: usize, day: usize, open: f64, drift: f64) -> Latent {
    let mut rng = stream_rng(spec.seed, asset, day, Purpose::Price);
    let sigma = spec.minute_vol;
    let base = spec.activity_base;
    let mut inc = vec![0.0; MINUTES_PER_DAY];
    let mut activity = vec![0.0; MINUTES_PER_DAY];
    for m in 0..MINUTES_PER_DAY {
        let z: f64 = StandardNormal.sample(&mut rng);
        inc[m] = drift / MINUTES_PER_DAY as f64 + sigma * z;
        activity[m] = (base + z.abs() / crate::tsmodel::E_ABS_Z) / (base + 1.0);
    }
    let diffusive_return = inc.iter().sum();
    let mut jump_return = 0.0;
    if spec.has_jumps(asset) {
        let size = Normal::new(spec.jump_mean, spec.jump_sd).expect("finite jump parameters");
        for _ in 0..poisson(&mut rng, spec.jump_intensity) {
            let m = rng.random_range(0..MINUTES_PER_DAY);
            let j = size.sample(&mut rng);
            inc[m] += j;
            jump_return += j;
            if sigma > 0.0 {
                activity[m] += spec.jump_activity * j.abs() / sigma;
            }
        }
    }
    let mut log_close = Vec::with_capacity(MINUTES_PER_DAY);
    let mut lp = open.ln();
    for x in inc {
        lp += x;
        log_close.push(lp);
    }
    Latent {
        log_close,
        activity,
        jump_return,
        diffusive_return,
    }
}

fn genuine_ticks(
    spec: &SynthSpec,
    asset: usize,
    day: usize,
    day_start: i64,
    latent: &Latent,
) -> Vec<TradeTick> {
    let mut rng = stream_rng(spec.seed, asset, day, Purpose::Trades);
    let s = spec.amount_sigma;
    let mut out = Vec::with_capacity((spec.trade_rate * MINUTES_PER_DAY as f64 * 1.1) as usize);
    for m in 0..MINUTES_PER_DAY {
        let act = latent.activity[m];
        let mut n = poisson(&mut rng, spec.trade_rate * act);
        if act > 5.0 {
            n = n.max(1);
        }
        if n == 0 {
            continue;
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        let amount = spec.base_amount * act * (s * e - 0.5 * s * s).exp();
        let mut offsets: Vec<i64> = (0..n).map(|_| rng.random_range(0..MS_PER_MINUTE)).collect();
        offsets.sort_unstable();
        let shares = split_amount(&mut rng, amount, n);
        let true_price = latent.log_close[m].exp();
        let minute_start = day_start + m as i64 * MS_PER_MINUTE;
        for (off, q) in offsets.into_iter().zip(shares) {
            let e: f64 = StandardNormal.sample(&mut rng);
            out.push(tick(
                minute_start + off,
                true_price * (spec.micro_noise * e).exp(),
                q,
            ));
        }
    }
    out
}

/// Per-minute view of genuine trading used to place injected trades.
struct MinuteIndex {
    last_ts: Vec<Option<i64>>,
    close: Vec<Option<f64>>,
}

impl MinuteIndex {
    fn new(ticks: &[TradeTick], day_start: i64) -> Self {
        let mut last_ts = vec![None; MINUTES_PER_DAY];
        let mut close = vec![None; MINUTES_PER_DAY];
        for t in ticks {
            let m = ((t.timestamp_ms - day_start) / MS_PER_MINUTE) as usize;
            last_ts[m] = Some(t.timestamp_ms);
            close[m] = Some(t.price);
        }
        Self { last_ts, close }
    }

    /// Genuine close carried through minute `m`, or `open` before any trade.
    fn carried(&self, m: usize, open: f64) -> f64 {
        self.close[..=m]
            .iter()
            .rev()
            .find_map(|c| *c)
            .unwrap_or(open)
    }
}

/// Placement of an injected trade relative to genuine trades sharing its
/// timestamp.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Before = 0,
    Genuine = 1,
    After = 2,
}

/// Adds wash trades to one asset-day of genuine ticks.
///
/// `open` is the price in force before the first tick of the day. Returns
/// the merged ticks and one sidecar record per injected trade; with no wash
/// mode or zero intensity the ticks come back unchanged.
pub fn inject_wash_trades(
    ticks: &[TradeTick],
    day_start: i64,
    open: f64,
    spec: &SynthSpec,
    asset: usize,
    day: usize,
) -> (Vec<TradeTick>, Vec<WashRecord>) {
    let w = &spec.wash;
    let mut rng = stream_rng(spec.seed, asset, day, Purpose::Wash);
    let idx = MinuteIndex::new(ticks, day_start);
    let noise = Normal::new(0.0, spec.micro_noise).expect("finite noise");
    let mut injected: Vec<(TradeTick, Slot)> = Vec::new();
    let minute_start = |m: usize| day_start + m as i64 * MS_PER_MINUTE;

    match w.mode {
        WashMode::None => {}
        WashMode::HfSmall => {
            let volume = w.burst_volume_multiple * spec.base_amount;
            let n = w.burst_trades.max(1);
            let mut used = vec![false; MINUTES_PER_DAY];
            for _ in 0..poisson(&mut rng, w.burst_rate) {
                let m = rng.random_range(0..MINUTES_PER_DAY - 1);
                let up = rng.random_bool(0.5);
                if used[m] || used[m + 1] || volume <= 0.0 {
                    continue;
                }
                used[m] = true;
                used[m + 1] = true;
                let reference = idx.carried(m, open);
                let shift = w.burst_displacement * spec.minute_vol;
                let target = reference * if up { 1.0 + shift } else { 1.0 - shift };

                // Minute m: trades after the genuine close, the last one at the displaced price.
                let lo = idx.last_ts[m].unwrap_or(minute_start(m));
                let hi = minute_start(m + 1);
                let mut ts: Vec<i64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
                ts.sort_unstable();
                let shares = split_amount(&mut rng, volume, n);
                for (i, (t, q)) in ts.into_iter().zip(shares).enumerate() {
                    let price = if i + 1 == n {
                        target
                    } else {
                        reference * noise.sample(&mut rng).exp()
                    };
                    injected.push((tick(t, price, q), Slot::After));
                }

                // Minute m+1: trades ahead of the genuine close, or a final
                // trade back at the reference when the minute has none.
                let next = m + 1;
                let (lo, hi, slot) = match idx.last_ts[next] {
                    Some(last) => (minute_start(next), last + 1, Slot::Before),
                    None => (minute_start(next), minute_start(next + 1), Slot::After),
                };
                let mut ts: Vec<i64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
                ts.sort_unstable();
                let shares = split_amount(&mut rng, volume, n);
                for (i, (t, q)) in ts.into_iter().zip(shares).enumerate() {
                    let last = i + 1 == n && slot == Slot::After;
                    let price = if last {
                        reference
                    } else {
                        target * noise.sample(&mut rng).exp()
                    };
                    injected.push((tick(t, price, q), slot));
                }
            }
        }
        WashMode::Whale => {
            let volume = w.whale_volume_multiple * spec.base_amount;
            let mut r = vec![0.0; MINUTES_PER_DAY];
            let mut prev = open;
            for m in 0..MINUTES_PER_DAY {
                if let Some(c) = idx.close[m] {
                    r[m] = c / prev - 1.0;
                    prev = c;
                }
            }
            let direction = if r.iter().sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            };
            let mut order: Vec<usize> = (0..MINUTES_PER_DAY)
                .filter(|&m| idx.close[m].is_some())
                .collect();
            order.sort_by(|&a, &b| {
                (r[b] * direction)
                    .total_cmp(&(r[a] * direction))
                    .then(a.cmp(&b))
            });
            order.truncate(MINUTES_PER_DAY / 10);
            let k = poisson(&mut rng, w.whale_rate).min(order.len());
            if volume > 0.0 {
                let mut chosen: Vec<usize> = index::sample(&mut rng, order.len(), k)
                    .into_iter()
                    .map(|i| order[i])
                    .collect();
                chosen.sort_unstable();
                for m in chosen {
                    let (Some(last), Some(close)) = (idx.last_ts[m], idx.close[m]) else {
                        continue;
                    };
                    let t = rng.random_range(minute_start(m)..=last);
                    injected.push((tick(t, close, volume), Slot::Before));
                }
            }
        }
    }

    if injected.is_empty() {
        return (ticks.to_vec(), Vec::new());
    }
    let mut merged: Vec<(TradeTick, Slot)> = ticks.iter().map(|t| (*t, Slot::Genuine)).collect();
    merged.extend(injected);
    merged.sort_by(|a, b| a.0.timestamp_ms.cmp(&b.0.timestamp_ms).then(a.1.cmp(&b.1)));
    let wash = merged
        .iter()
        .filter(|(_, s)| *s != Slot::Genuine)
        .map(|(t, _)| WashRecord {
            timestamp_ms: t.timestamp_ms,
            quote_amount: t.quote_amount,
            mode: w.mode,
        })
        .collect();
    (merged.into_iter().map(|(t, _)| t).collect(), wash)
}

/// Generates every day of one asset in order, handing each to `sink`.
pub fn generate_asset<F>(spec: &SynthSpec, asset: usize, mut sink: F) -> Result<()>
where
    F: FnMut(AssetDay) -> Result<()>,
{
    spec.validate()?;
    if asset >= spec.n_assets {
        return Err(Error::InvalidInput(format!(
            "asset {asset} outside 0..{}",
            spec.n_assets
        )));
    }
    let compensation = if spec.compensate_jumps && spec.has_jumps(asset) {
        spec.jump_intensity * spec.jump_mean
    } else {
        0.0
    };
    let long_run = spec.daily_drift - compensation;
    let mut open = spec.base_price(asset);
    let mut prev_diffusive = long_run;
    for day in 0..spec.n_days {
        let drift = long_run + spec.momentum * (prev_diffusive - long_run);
        let latent = latent_path(spec, asset, day, open, drift);
        let day_start = spec.start_ms + day as i64 * MS_PER_DAY;
        let genuine = genuine_ticks(spec, asset, day, day_start, &latent);
        let (ticks, wash) = inject_wash_trades(&genuine, day_start, open, spec, asset, day);
        open = latent.log_close[MINUTES_PER_DAY - 1].exp();
        prev_diffusive = latent.diffusive_return;
        sink(AssetDay {
            asset,
            day_index: day,
            day_start_ms: day_start,
            ticks,
            wash,
            jump_return: latent.jump_return,
            diffusive_return: latent.diffusive_return,
        })?;
    }
    Ok(())
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Writes `{ASSET}/{day:05}.csv` tick files plus `{ASSET}/wash_truth.csv`
/// under `dir`, assets in parallel. Returns the written paths sorted.
pub fn generate_market(spec: &SynthSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    let per_asset: Vec<Result<Vec<PathBuf>>> = (0..spec.n_assets)
        .into_par_iter()
        .map(|asset| {
            let asset_dir = dir.join(spec.asset_name(asset));
            fs::create_dir_all(&asset_dir).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", asset_dir.display()),
                ))
            })?;
            let truth_path = asset_dir.join(WASH_TRUTH_FILE);
            let mut truth = std::io::BufWriter::new(create_file(&truth_path)?);
            writeln!(truth, "timestamp_ms,quote_amount,mode")?;
            let mut paths = Vec::with_capacity(spec.n_days + 1);
            generate_asset(spec, asset, |d| {
                let path = asset_dir.join(format!("{:05}.csv", d.day_index));
                write_ticks_csv(create_file(&path)?, &d.ticks)?;
                for w in &d.wash {
                    writeln!(
                        truth,
                        "{},{},{}",
                        w.timestamp_ms,
                        w.quote_amount,
                        w.mode.label()
                    )?;
                }
                paths.push(path);
                Ok(())
            })?;
            truth.flush()?;
            paths.push(truth_path);
            Ok(paths)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_asset {
        all.extend(r?);
    }
    all.sort();
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_minute_bars;

    fn small(mode: WashMode) -> SynthSpec {
        let mut s = SynthSpec {
            n_assets: 2,
            n_days: 3,
            ..SynthSpec::default()
        };
        s.wash.mode = mode;
        s
    }

    fn collect(spec: &SynthSpec, asset: usize) -> Vec<AssetDay> {
        let mut v = Vec::new();
        generate_asset(spec, asset, |d| {
            v.push(d);
            Ok(())
        })
        .unwrap();
        v
    }

    #[test]
    fn streams_are_independent_of_order() {
        let spec = small(WashMode::HfSmall);
        let a = collect(&spec, 1);
        let _ = collect(&spec, 0);
        assert_eq!(a, collect(&spec, 1));
        let mut r1 = stream_rng(7, 1, 2, Purpose::Price);
        let mut r2 = stream_rng(7, 1, 2, Purpose::Trades);
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn ticks_are_valid_and_sorted() {
        for mode in [WashMode::None, WashMode::HfSmall, WashMode::Whale] {
            for d in collect(&small(mode), 0) {
                assert!(d.ticks.iter().all(TradeTick::is_valid));
                assert!(d
                    .ticks
                    .windows(2)
                    .all(|w| w[0].timestamp_ms <= w[1].timestamp_ms));
                assert!(d
                    .ticks
                    .iter()
                    .all(|t| (0..MS_PER_DAY).contains(&(t.timestamp_ms - d.day_start_ms))));
            }
        }
    }

    #[test]
    fn zero_intensity_leaves_ticks_unchanged() {
        let mut spec = small(WashMode::HfSmall);
        spec.wash.burst_rate = 0.0;
        let clean = collect(&small(WashMode::None), 0);
        let zero = collect(&spec, 0);
        assert_eq!(clean, zero);
        assert!(zero.iter().all(|d| d.wash.is_empty()));
    }

    #[test]
    fn sidecar_volume_matches_injected_amount() {
        for mode in [WashMode::HfSmall, WashMode::Whale] {
            let spec = small(mode);
            let clean = collect(&small(WashMode::None), 0);
            for (d, c) in collect(&spec, 0).iter().zip(&clean) {
                let injected: f64 = d.ticks.iter().map(|t| t.quote_amount).sum::<f64>()
                    - c.ticks.iter().map(|t| t.quote_amount).sum::<f64>();
                let truth: f64 = d.wash.iter().map(|w| w.quote_amount).sum();
                assert_eq!(d.ticks.len(), c.ticks.len() + d.wash.len());
                assert!((injected - truth).abs() <= 1e-9 * truth.max(1.0));
            }
        }
    }

    #[test]
    fn hf_bursts_displace_and_revert_the_close() {
        let spec = small(WashMode::HfSmall);
        let clean = collect(&small(WashMode::None), 0);
        let dirty = collect(&spec, 0);
        let c = build_minute_bars(&clean[0].ticks, clean[0].day_start_ms, 0, Some(100.0)).unwrap();
        let d = build_minute_bars(&dirty[0].ticks, dirty[0].day_start_ms, 0, Some(100.0)).unwrap();
        let moved: Vec<usize> = (0..MINUTES_PER_DAY)
            .filter(|&m| c.bars[m].close_price != d.bars[m].close_price)
            .collect();
        assert!(!moved.is_empty());
        for &m in &moved {
            let shift = d.bars[m].close_price / c.bars[m].close_price - 1.0;
            assert!(
                (shift.abs() - 4.0 * spec.minute_vol).abs() < 1e-9,
                "minute {m} shift {shift}"
            );
            assert_eq!(d.bars[m + 1].close_price, c.bars[m + 1].close_price);
        }
    }

    #[test]
    fn whale_trades_keep_closes() {
        let clean = collect(&small(WashMode::None), 1);
        let whale = collect(&small(WashMode::Whale), 1);
        for (c, w) in clean.iter().zip(&whale) {
            let cb = build_minute_bars(&c.ticks, c.day_start_ms, 0, Some(200.0)).unwrap();
            let wb = build_minute_bars(&w.ticks, w.day_start_ms, 0, Some(200.0)).unwrap();
            assert_eq!(cb.returns(), wb.returns());
            assert!(wb.total_amount() > cb.total_amount() || w.wash.is_empty());
        }
    }

    #[test]
    fn trade_counts_scale_with_rate() {
        let base = SynthSpec {
            n_assets: 1,
            n_days: 20,
            ..SynthSpec::default()
        };
        let double = SynthSpec {
            trade_rate: 2.0 * base.trade_rate,
            ..base.clone()
        };
        let count =
            |s: &SynthSpec| collect(s, 0).iter().map(|d| d.ticks.len()).sum::<usize>() as f64;
        let ratio = count(&double) / count(&base);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn files_are_byte_identical_across_runs() {
        let spec = small(WashMode::HfSmall);
        let a = tempdir("a");
        let b = tempdir("b");
        let pa = generate_market(&spec, &a).unwrap();
        let pb = generate_market(&spec, &b).unwrap();
        assert_eq!(pa.len(), 2 * 4);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        fs::remove_dir_all(a).unwrap();
        fs::remove_dir_all(b).unwrap();
    }

    fn tempdir(tag: &str) -> PathBuf {
        let p = std::env::temp_dir().join(format!("liqjump-synth-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&p);
        fs::create_dir_all(&p).unwrap();
        p
    }
}
