//! Directional checks of the synthetic scenarios run through the full
//! ingest, treatment and liquidity pipeline.

use liqjump_core::liquidity::{beta_stats, DEFAULT_CAP};
use liqjump_core::pipeline::{process_ticks, universe_from_synth, PipelineConfig};
use liqjump_core::stats::{mean, median, percentile};
use liqjump_core::synth::generate_asset;
use liqjump_core::{DailyRecord, SynthSpec, UniverseData, WashMode};

fn universe(spec: &SynthSpec) -> UniverseData {
    universe_from_synth(spec, &PipelineConfig::default())
        .unwrap()
        .universe
}

fn pooled(set: &[Vec<DailyRecord>], f: fn(&DailyRecord) -> f64) -> Vec<f64> {
    set.iter().flatten().map(f).collect()
}

fn paired(mode: &str, n_assets: usize, n_days: usize) -> SynthSpec {
    SynthSpec {
        seed: 5,
        n_assets,
        n_days,
        ..SynthSpec::preset(mode).unwrap()
    }
}

/// Untreated minute amounts of every traded minute.
fn minute_amounts(spec: &SynthSpec) -> Vec<f64> {
    let cfg = PipelineConfig::default();
    let mut out = Vec::new();
    for asset in 0..spec.n_assets {
        let mut seed = None;
        generate_asset(spec, asset, |d| {
            let day = process_ticks(&d.ticks, d.day_start_ms, d.day_index, seed, &cfg)?;
            seed = Some(day.bars.last_close());
            out.extend(day.bars.amounts().into_iter().filter(|&a| a > 0.0));
            Ok(())
        })
        .unwrap();
    }
    out
}

#[test]
fn clean_market_keeps_beta_sigma_below_one_for_most_assets() {
    let spec = SynthSpec::preset("clean").unwrap();
    let u = universe(&spec);
    let mut below = 0;
    for rows in &u.untreated {
        let betas: Vec<f64> = rows.iter().map(|r| r.beta_diff).collect();
        let direct = betas.iter().sum::<f64>() / betas.len() as f64;
        let stats = beta_stats(&betas, DEFAULT_CAP).unwrap();
        assert!((stats.mean - direct).abs() <= 1e-12);
        if stats.mean < 1.0 {
            below += 1;
        }
    }
    assert!(
        below * 2 > u.n_assets(),
        "{below} of {} assets",
        u.n_assets()
    );
}

#[test]
fn clean_market_has_no_beta_r_at_the_cap() {
    // Cap days on clean data are rare rather than impossible; this seed has none.
    let spec = SynthSpec {
        seed: 3,
        n_assets: 1,
        n_days: 200,
        ..SynthSpec::default()
    };
    assert_eq!(spec.wash.mode, WashMode::None);
    assert_eq!(spec.jump_intensity, 0.0);
    let u = universe(&spec);
    let capped = pooled(&u.untreated, |r| r.beta_jump)
        .iter()
        .filter(|&&b| b >= DEFAULT_CAP)
        .count();
    assert_eq!(capped, 0);
}

#[test]
fn hf_small_wash_fattens_upper_amounts_and_raises_median_beta_sigma() {
    let clean = paired("clean", 3, 60);
    let hf = SynthSpec {
        wash: paired("hf_small", 3, 60).wash,
        ..clean.clone()
    };
    let base = minute_amounts(&clean);
    let p75 = percentile(&base, 0.75);
    let above = |a: &[f64]| a.iter().filter(|&&x| x > p75).count() as f64 / a.len() as f64;
    assert!(above(&minute_amounts(&hf)) > above(&base));

    let m_clean = median(&pooled(&universe(&clean).untreated, |r| r.beta_diff));
    let m_hf = median(&pooled(&universe(&hf).untreated, |r| r.beta_diff));
    assert!(m_hf > m_clean, "median beta_sigma {m_clean} -> {m_hf}");
}

#[test]
fn whale_wash_raises_mean_beta_r_more_than_median_beta_sigma() {
    let clean = paired("clean", 5, 100);
    let with = |mode: &str| SynthSpec {
        wash: paired(mode, 5, 100).wash,
        ..clean.clone()
    };
    let u_clean = universe(&clean);
    let u_whale = universe(&with("whale"));
    let u_hf = universe(&with("hf_small"));

    let r = |u: &UniverseData| mean(&pooled(&u.untreated, |r| r.beta_jump));
    let s = |u: &UniverseData| median(&pooled(&u.untreated, |r| r.beta_diff));
    assert!(r(&u_whale) > r(&u_clean));
    let rel = |u: &UniverseData| ((s(u) - s(&u_clean)) / s(&u_clean)).abs();
    assert!(
        rel(&u_whale) < rel(&u_hf),
        "whale {} vs hf_small {}",
        rel(&u_whale),
        rel(&u_hf)
    );
}
