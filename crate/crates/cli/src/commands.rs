//! The four subcommands. Every artifact lands under the configured output
//! directory and the manifest is rewritten after each command.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use liqjump_core::backtest::{
    compute_forecasts, run_backtest, table3_summary, write_returns_csv, write_weights_csv,
    BacktestForecasts, BacktestReport, Table3Summary,
};
use liqjump_core::liquidity::{
    beta_stats, beta_table_rows, classify_extreme, write_beta_table_csv, DailyRecord,
};
use liqjump_core::pipeline::{asset_from_dir, universe_from_dir, Branches};
use liqjump_core::synth::generate_market;
use liqjump_core::tsmodel::ForecastTable;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;

fn create_dir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| {
        CliError::Output(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", p.display()),
        ))
    })
}

fn create_file(p: &Path) -> Result<fs::File, CliError> {
    fs::File::create(p).map_err(|e| {
        CliError::Output(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", p.display()),
        ))
    })
}

fn write_json(p: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(p, text).map_err(|e| {
        CliError::Output(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", p.display()),
        ))
    })
}

fn is_day_file(name: &str) -> bool {
    name.len() == 9 && name.ends_with(".csv") && name[..5].bytes().all(|b| b.is_ascii_digit())
}

/// Asset names: the configured list, or every subdirectory holding day files.
pub fn discover_assets(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    if !cfg.data.assets.is_empty() {
        return Ok(cfg.data.assets.clone());
    }
    let dir = cfg.tick_dir();
    let entries = fs::read_dir(&dir).map_err(|e| {
        CliError::Data(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display())).into())
    })?;
    let mut assets = Vec::new();
    for entry in entries.flatten() {
        let path = entry.path();
        let has_days = path.is_dir()
            && fs::read_dir(&path).is_ok_and(|mut it| {
                it.any(|f| f.is_ok_and(|f| is_day_file(&f.file_name().to_string_lossy())))
            });
        if has_days {
            assets.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    assets.sort();
    if assets.is_empty() {
        return Err(CliError::Config(format!(
            "asset list is empty: no tick directories under {}",
            dir.display()
        )));
    }
    Ok(assets)
}

/// Day range: configured, or consecutive day files of the first asset.
pub fn discover_days(cfg: &RunConfig, assets: &[String]) -> std::ops::Range<usize> {
    let first = cfg.data.first_day;
    let n = cfg.data.n_days.unwrap_or_else(|| {
        let dir = cfg.tick_dir().join(&assets[0]);
        (first..)
            .take_while(|d| dir.join(format!("{d:05}.csv")).is_file())
            .count()
    });
    first..first + n
}

fn branches(b: Branches) -> Vec<(&'static str, bool)> {
    let mut v = Vec::new();
    if b.untreated() {
        v.push(("untreated", false));
    }
    if b.treated() {
        v.push(("treated", true));
    }
    v
}

/// Writes tick files for the `[synth]` section under `{out}/ticks`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<String, CliError> {
    let out = &cfg.data.out;
    let ticks = out.join("ticks");
    create_dir(&ticks)?;
    let files = generate_market(&cfg.synth, &ticks)?;
    write_json(
        &out.join("synth_spec.json"),
        &serde_json::to_value(&cfg.synth)?,
    )?;
    let m = write_manifest(out)?;
    Ok(format!(
        "wrote {} files for {} assets x {} days; manifest lists {} artifacts",
        files.len(),
        cfg.synth.n_assets,
        cfg.synth.n_days,
        m.artifacts.len()
    ))
}

/// Day records, beta tables and beta statistics per treatment branch.
pub fn cmd_liquidity(cfg: &RunConfig) -> Result<String, CliError> {
    let assets = discover_assets(cfg)?;
    let days = discover_days(cfg, &assets);
    if days.is_empty() {
        return Err(CliError::Data(liqjump_core::Error::MissingDay {
            day: days.start,
            what: "no tick files".into(),
        }));
    }
    let pipeline = cfg.pipeline();
    let dir = cfg.tick_dir();
    let per_asset: Vec<Vec<(DailyRecord, DailyRecord)>> = assets
        .par_iter()
        .map(|a| {
            asset_from_dir(&dir, a, days.clone(), cfg.data.start_ms, &pipeline)
                .map(|v| v.iter().map(|(u, t)| (u.daily(), t.daily())).collect())
        })
        .collect::<Result<_, _>>()?;

    let out = cfg.data.out.join("liquidity");
    create_dir(&out)?;
    let cap = cfg.liquidity.cap;
    let mut rows = 0;
    for (name, treated) in branches(cfg.liquidity.treatment) {
        let mut stats = serde_json::Map::new();
        let mut extremes =
            std::io::BufWriter::new(create_file(&out.join(format!("extreme_days_{name}.csv")))?);
        writeln!(
            extremes,
            "asset,day,beta_jump,beta_diff,extreme_jump,extreme_diffusion"
        )?;
        for (asset, recs) in assets.iter().zip(&per_asset) {
            let recs: Vec<DailyRecord> = recs
                .iter()
                .map(|(u, t)| if treated { *t } else { *u })
                .collect();
            rows += recs.len();
            let f = create_file(&out.join(format!("beta_table_{asset}_{name}.csv")))?;
            write_beta_table_csv(f, &beta_table_rows(&recs))?;
            let bj: Vec<f64> = recs.iter().map(|r| r.beta_jump).collect();
            let bd: Vec<f64> = recs.iter().map(|r| r.beta_diff).collect();
            stats.insert(
                asset.clone(),
                json!({
                    "beta_jump": beta_stats(&bj, cap)?.to_table_json(),
                    "beta_diff": beta_stats(&bd, cap)?.to_table_json(),
                }),
            );
            let thresholds = pipeline.liquidity.extreme;
            for r in &recs {
                let flags = classify_extreme(r.beta_jump, r.beta_diff, &thresholds);
                if flags.extreme_jump || flags.extreme_diffusion {
                    writeln!(
                        extremes,
                        "{asset},{},{},{},{},{}",
                        r.day_index,
                        r.beta_jump,
                        r.beta_diff,
                        flags.extreme_jump,
                        flags.extreme_diffusion
                    )?;
                }
            }
        }
        extremes.flush()?;
        write_json(
            &out.join(format!("beta_stats_{name}.json")),
            &json!({ "branch": name, "cap": cap, "days": days.len(), "assets": stats }),
        )?;
    }
    let m = write_manifest(&cfg.data.out)?;
    Ok(format!(
        "{} assets x {} days, {rows} day records; manifest lists {} artifacts",
        assets.len(),
        days.len(),
        m.artifacts.len()
    ))
}

fn write_forecasts(path: &Path, assets: &[String], f: &BacktestForecasts) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(create_file(path)?);
    writeln!(
        w,
        "basis,date_index,asset,mu_hat,p,q,variance_kind,converged"
    )?;
    let tables: [(&str, &Option<ForecastTable>); 3] = [
        ("regular", &f.regular),
        ("adjusted_treated", &f.treated),
        ("adjusted_untreated", &f.untreated),
    ];
    for (basis, table) in tables {
        let Some(t) = table else { continue };
        for row in &t.rows {
            for (asset, e) in assets.iter().zip(row) {
                let kind = e.variance_kind.map_or(String::new(), |k| k.to_string());
                writeln!(
                    w,
                    "{basis},{},{asset},{},{},{},{kind},{}",
                    e.date_index, e.mu_hat, e.p, e.q, e.converged
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn report_json(report: &BacktestReport, summary: &Table3Summary) -> Value {
    let portfolios: Vec<Value> = report
        .portfolios
        .iter()
        .map(|p| {
            json!({
                "id": p.spec.id,
                "label": p.spec.label(),
                "kind": p.spec.kind,
                "treatment": p.spec.treatment,
                "basis": p.spec.basis,
                "out_of_sample_days": p.days.len(),
                "max_daily_return": p.max_daily_return,
                "max_daily_volatility": p.max_daily_volatility,
                "annualized_return": p.sharpe.map(|s| s.annualized_return),
                "annualized_volatility": p.sharpe.map(|s| s.annualized_volatility),
                "sharpe": p.sharpe.map(|s| s.sharpe),
                "lambda_clamped_days": p.lambda_clamped_days,
                "inverse_floored_days": p.inverse_floored_days,
            })
        })
        .collect();
    json!({
        "window": report.window,
        "assets": report.assets,
        "table3": summary.to_json(),
        "columns": summary.columns,
        "portfolios": portfolios,
    })
}

/// Forecasts, walk-forward backtest and Table-3 style report.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<String, CliError> {
    let bt = cfg.backtest()?;
    let assets = discover_assets(cfg)?;
    let days = discover_days(cfg, &assets);
    if days.len() < bt.window + 1 {
        return Err(CliError::Model(liqjump_core::Error::SeriesTooShort {
            needed: bt.window + 1,
            got: days.len(),
        }));
    }
    let mut universe = universe_from_dir(
        &cfg.tick_dir(),
        &assets,
        days,
        cfg.data.start_ms,
        &cfg.pipeline(),
    )?;
    if !cfg.liquidity.treatment.treated() {
        universe.treated.clear();
    }
    let forecasts = compute_forecasts(&universe, &bt)?;
    let report = run_backtest(&universe, &bt, &forecasts)?;
    let summary = table3_summary(&report, cfg.backtest.annualize_volatility);

    let out = cfg.data.out.join("backtest");
    create_dir(&out)?;
    write_json(&out.join("report.json"), &report_json(&report, &summary))?;
    write_returns_csv(create_file(&out.join("returns.csv"))?, &report)?;
    write_weights_csv(create_file(&out.join("weights.csv"))?, &report)?;
    write_forecasts(&out.join("forecasts.csv"), &universe.assets, &forecasts)?;
    let m = write_manifest(&cfg.data.out)?;
    Ok(format!(
        "{}manifest lists {} artifacts",
        render_table3(&summary),
        m.artifacts.len()
    ))
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

/// Markdown table with one row per portfolio and one column per panel.
pub fn render_table3(summary: &Table3Summary) -> String {
    let vol = if summary.annualized_volatility {
        "max volatility (annualized)"
    } else {
        "max daily volatility"
    };
    let mut s = format!(
        "| portfolio | label | max daily return | {vol} | Sharpe ratio |\n|---|---|---|---|---|\n"
    );
    for c in &summary.columns {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            c.id,
            c.label,
            fmt(Some(c.max_daily_return)),
            fmt(Some(c.max_daily_volatility)),
            fmt(c.sharpe)
        ));
    }
    s
}

fn read_json(p: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(p).map_err(|e| {
        CliError::Data(liqjump_core::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", p.display()),
        )))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Data(liqjump_core::Error::InFile {
            path: p.display().to_string(),
            source: Box::new(e.into()),
        })
    })
}

/// Renders stored results as markdown under `{out}/report`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let root = &cfg.data.out;
    let report = read_json(&root.join("backtest").join("report.json"))?;
    let summary: Table3Summary = serde_json::from_value(json!({
        "annualized_volatility": report["table3"]["annualized_volatility"],
        "columns": report["columns"],
    }))
    .map_err(|e| CliError::Data(liqjump_core::Error::Json(e)))?;
    let mut text = format!("# Portfolio summary\n\n{}", render_table3(&summary));

    for name in ["untreated", "treated"] {
        let path: PathBuf = root
            .join("liquidity")
            .join(format!("beta_stats_{name}.json"));
        if !path.is_file() {
            continue;
        }
        let stats = read_json(&path)?;
        text.push_str(&format!("\n# Beta statistics ({name})\n"));
        let Some(assets) = stats["assets"].as_object() else {
            continue;
        };
        for (kind, title) in [
            ("beta_jump", "liquidity jump"),
            ("beta_diff", "liquidity diffusion"),
        ] {
            text.push_str(&format!("\n## {title}\n\n| statistic |"));
            for a in assets.keys() {
                text.push_str(&format!(" {a} |"));
            }
            text.push_str("\n|---|");
            text.push_str(&"---|".repeat(assets.len()));
            text.push('\n');
            let n_rows = assets
                .values()
                .next()
                .and_then(|v| v[kind].as_array())
                .map_or(0, Vec::len);
            for i in 0..n_rows {
                let label = assets
                    .values()
                    .next()
                    .and_then(|v| v[kind][i][0].as_str())
                    .unwrap_or("");
                text.push_str(&format!("| {label} |"));
                for v in assets.values() {
                    text.push_str(&format!(" {} |", fmt(v[kind][i][1].as_f64())));
                }
                text.push('\n');
            }
        }
    }
    let out = root.join("report");
    create_dir(&out)?;
    fs::write(out.join("summary.md"), &text)?;
    write_manifest(root)?;
    Ok(text)
}
