//! Run configuration: TOML file, then `LIQJUMP_<SECTION>_<KEY>` environment
//! variables, then command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use liqjump_core::backtest::{parse_portfolio_list, BacktestConfig, PortfolioSpec, Treatment};
use liqjump_core::liquidity::{Aggregation, ExtremeThresholds, LiquidityConfig};
use liqjump_core::pipeline::{Branches, PipelineConfig};
use liqjump_core::tsmodel::RollingConfig;
use liqjump_core::{SynthSpec, TreatmentSpec};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "LIQJUMP_";
const SECTIONS: [&str; 5] = ["data", "liquidity", "model", "backtest", "synth"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Tick directory; defaults to `{out}/ticks`.
    pub dir: Option<PathBuf>,
    pub out: PathBuf,
    /// Assets to read; empty means every subdirectory of `dir`.
    pub assets: Vec<String>,
    /// Midnight of day 0 in ms since epoch (UTC).
    pub start_ms: i64,
    pub first_day: usize,
    /// Number of days; absent means every consecutive day file present.
    pub n_days: Option<usize>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: None,
            out: PathBuf::from("out"),
            assets: Vec::new(),
            start_ms: SynthSpec::default().start_ms,
            first_day: 0,
            n_days: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiquiditySection {
    pub treatment: Branches,
    pub cap: f64,
    pub aggregation: Aggregation,
    pub q3_multiplier: f64,
    pub q4_multiplier: f64,
    pub extreme_jump: f64,
    pub extreme_diffusion: f64,
}

impl Default for LiquiditySection {
    fn default() -> Self {
        let t = TreatmentSpec::default();
        let l = LiquidityConfig::default();
        Self {
            treatment: Branches::Both,
            cap: l.cap,
            aggregation: l.aggregation,
            q3_multiplier: t.q3_multiplier,
            q4_multiplier: t.q4_multiplier,
            extreme_jump: l.extreme.jump,
            extreme_diffusion: l.extreme.diffusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub max_p: usize,
    pub max_q: usize,
    pub order_refit_every: usize,
    pub coef_refit_every: usize,
    pub fit_variance: bool,
    pub variance_refit_every: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let r = RollingConfig::default();
        Self {
            max_p: r.max_p,
            max_q: r.max_q,
            order_refit_every: r.order_refit_every,
            coef_refit_every: r.coef_refit_every,
            fit_variance: r.fit_variance,
            variance_refit_every: r.variance_refit_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub window: usize,
    pub cap: f64,
    pub lambda_floor: f64,
    /// Portfolio ids such as `"1-12"` or `"1,7,10"`.
    pub portfolios: String,
    pub inverse_floor: f64,
    /// Report volatilities multiplied by `√365`.
    pub annualize_volatility: bool,
}

impl Default for BacktestSection {
    fn default() -> Self {
        let b = BacktestConfig::default();
        Self {
            window: b.window,
            cap: b.cap,
            lambda_floor: b.lambda_floor,
            portfolios: "1-12".into(),
            inverse_floor: b.inverse_floor,
            annualize_volatility: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub liquidity: LiquiditySection,
    pub model: ModelSection,
    pub backtest: BacktestSection,
    pub synth: SynthSpec,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub treatment: Option<String>,
    pub window: Option<usize>,
    pub portfolios: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Parses an environment value as a TOML scalar or array, falling back to
/// a plain string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn section<'a>(root: &'a mut Table, name: &str) -> Result<&'a mut Table, CliError> {
    root.entry(name.to_string())
        .or_insert_with(|| Value::Table(Table::new()))
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("[{name}] must be a table")))
}

/// Applies `LIQJUMP_<SECTION>_<KEY>` variables; `LIQJUMP_SYNTH_WASH_<KEY>`
/// reaches the nested wash table.
pub fn apply_env<I: IntoIterator<Item = (String, String)>>(
    root: &mut Table,
    vars: I,
) -> Result<(), CliError> {
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let rest = key[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some(sec) = SECTIONS.iter().find(|s| rest.starts_with(&format!("{s}_"))) else {
            continue;
        };
        let field = &rest[sec.len() + 1..];
        let mut table = section(root, sec)?;
        let field = match field.strip_prefix("wash_") {
            Some(f) if *sec == "synth" => {
                table = section(table, "wash")?;
                f
            }
            _ => field,
        };
        table.insert(field.to_string(), parse_value(&raw));
    }
    Ok(())
}

fn apply_overrides(root: &mut Table, o: &Overrides) -> Result<(), CliError> {
    if let Some(t) = &o.treatment {
        section(root, "liquidity")?.insert("treatment".into(), Value::String(t.clone()));
    }
    if let Some(w) = o.window {
        section(root, "backtest")?.insert("window".into(), Value::Integer(w as i64));
    }
    if let Some(p) = &o.portfolios {
        section(root, "backtest")?.insert("portfolios".into(), Value::String(p.clone()));
    }
    if let Some(s) = o.seed {
        let s = i64::try_from(s)
            .map_err(|_| CliError::Config(format!("seed {s} exceeds the config integer range")))?;
        section(root, "synth")?.insert("seed".into(), Value::Integer(s));
    }
    if let Some(out) = &o.out {
        section(root, "data")?.insert("out".into(), Value::String(out.display().to_string()));
    }
    Ok(())
}

/// Expands `synth.scenario = "<name>"` into the named preset, with the
/// remaining `[synth]` keys applied on top.
fn expand_scenario(root: &mut Table) -> Result<(), CliError> {
    let Some(Value::Table(synth)) = root.get_mut("synth") else {
        return Ok(());
    };
    let Some(name) = synth.remove("scenario") else {
        return Ok(());
    };
    let name = name
        .as_str()
        .ok_or_else(|| CliError::Config("synth.scenario must be a string".into()))?
        .to_string();
    let preset = SynthSpec::preset(&name).map_err(|e| CliError::Config(e.to_string()))?;
    let mut base = match Value::try_from(&preset) {
        Ok(Value::Table(t)) => t,
        Ok(_) => {
            return Err(CliError::Internal(
                "preset did not serialize to a table".into(),
            ))
        }
        Err(e) => return Err(CliError::Internal(e.to_string())),
    };
    merge(&mut base, std::mem::take(synth));
    *synth = base;
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Builds the configuration from an optional file, the environment and
    /// flags, in increasing precedence.
    pub fn load<I>(path: Option<&Path>, env: I, overrides: &Overrides) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        apply_env(&mut root, env)?;
        apply_overrides(&mut root, overrides)?;
        expand_scenario(&mut root)?;
        let cfg: RunConfig = Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        if self.backtest.window < 50 {
            return err(format!(
                "window must be at least 50, got {}",
                self.backtest.window
            ));
        }
        if !(self.backtest.cap > 0.0) || !(self.liquidity.cap > 0.0) {
            return err("caps must be positive".into());
        }
        if self.model.max_p > 4 || self.model.max_q > 4 || self.model.max_p + self.model.max_q == 0
        {
            return err("model grid bounds must lie in 0..=4 and not both be zero".into());
        }
        self.treatment()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.synth
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for id in self.portfolio_ids()? {
            PortfolioSpec::by_id(id).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Rejects portfolios that need a treatment branch the run excludes.
    fn check_branches(&self) -> Result<(), CliError> {
        for id in self.portfolio_ids()? {
            let spec = PortfolioSpec::by_id(id).map_err(|e| CliError::Config(e.to_string()))?;
            let clash = match self.liquidity.treatment {
                Branches::On => spec.treatment == Treatment::Without,
                Branches::Off => spec.treatment == Treatment::With,
                Branches::Both => false,
            };
            if clash {
                return Err(CliError::Config(format!(
                    "portfolio {id} needs the {:?} branch, excluded by treatment setting",
                    spec.treatment
                )));
            }
        }
        Ok(())
    }

    pub fn portfolio_ids(&self) -> Result<Vec<u8>, CliError> {
        parse_portfolio_list(&self.backtest.portfolios).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn tick_dir(&self) -> PathBuf {
        self.data
            .dir
            .clone()
            .unwrap_or_else(|| self.data.out.join("ticks"))
    }

    pub fn treatment(&self) -> TreatmentSpec {
        TreatmentSpec {
            q3_multiplier: self.liquidity.q3_multiplier,
            q4_multiplier: self.liquidity.q4_multiplier,
            enabled: true,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            liquidity: LiquidityConfig {
                cap: self.liquidity.cap,
                aggregation: self.liquidity.aggregation,
                extreme: ExtremeThresholds {
                    jump: self.liquidity.extreme_jump,
                    diffusion: self.liquidity.extreme_diffusion,
                },
            },
            treatment: self.treatment(),
        }
    }

    pub fn backtest(&self) -> Result<BacktestConfig, CliError> {
        self.check_branches()?;
        let m = &self.model;
        Ok(BacktestConfig {
            window: self.backtest.window,
            cap: self.backtest.cap,
            lambda_floor: self.backtest.lambda_floor,
            portfolios: self.portfolio_ids()?,
            inverse_floor: self.backtest.inverse_floor,
            rolling: RollingConfig {
                window: self.backtest.window,
                order_refit_every: m.order_refit_every,
                coef_refit_every: m.coef_refit_every,
                max_p: m.max_p,
                max_q: m.max_q,
                fit_variance: m.fit_variance,
                variance_refit_every: m.variance_refit_every,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(toml: &str, env: &[(&str, &str)], o: &Overrides) -> Result<RunConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, toml).unwrap();
        RunConfig::load(
            Some(&p),
            env.iter().map(|(k, v)| (k.to_string(), v.to_string())),
            o,
        )
    }

    #[test]
    fn precedence_file_env_flags() {
        let c = load(
            "[backtest]\nwindow = 100\nportfolios = \"1\"\n",
            &[],
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(c.backtest.window, 100);
        let c = load(
            "[backtest]\nwindow = 100\n",
            &[("LIQJUMP_BACKTEST_WINDOW", "200")],
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(c.backtest.window, 200);
        let o = Overrides {
            window: Some(300),
            ..Overrides::default()
        };
        let c = load(
            "[backtest]\nwindow = 100\n",
            &[("LIQJUMP_BACKTEST_WINDOW", "200")],
            &o,
        )
        .unwrap();
        assert_eq!(c.backtest.window, 300);
    }

    #[test]
    fn env_reaches_nested_and_typed_values() {
        let env = [
            ("LIQJUMP_SYNTH_WASH_MODE", "hf_small"),
            ("LIQJUMP_SYNTH_MINUTE_VOL", "0.002"),
            ("LIQJUMP_DATA_ASSETS", "[\"A\", \"B\"]"),
            ("LIQJUMP_LIQUIDITY_TREATMENT", "off"),
            ("OTHER_VAR", "x"),
        ];
        let o = Overrides {
            portfolios: Some("1,2,4".into()),
            ..Overrides::default()
        };
        let c = load("", &env, &o).unwrap();
        assert_eq!(c.synth.wash.mode, liqjump_core::WashMode::HfSmall);
        assert_eq!(c.synth.minute_vol, 0.002);
        assert_eq!(c.data.assets, vec!["A", "B"]);
        assert_eq!(c.liquidity.treatment, Branches::Off);
    }

    #[test]
    fn scenario_preset_with_overrides() {
        let c = load(
            "[synth]\nscenario = \"jump_heavy\"\nn_days = 10\n",
            &[],
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(c.synth.n_days, 10);
        assert_eq!(c.synth.jumpy_assets, Some(5));
        assert!(load("[synth]\nscenario = \"nope\"\n", &[], &Overrides::default()).is_err());
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            load("[backtest]\nwindow = 10\n", &[], &Overrides::default()),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            load("[synth]\nn_assets = 0\n", &[], &Overrides::default()),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            load("[backtest]\ncap = 0.0\n", &[], &Overrides::default()),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            load("[bogus]\nx = 1\n", &[], &Overrides::default()),
            Err(CliError::Config(_))
        ));
        let o = Overrides {
            treatment: Some("off".into()),
            portfolios: Some("3".into()),
            ..Overrides::default()
        };
        let cfg = load("", &[], &o).unwrap();
        assert!(matches!(cfg.backtest(), Err(CliError::Config(_))));
        assert!(matches!(
            load(
                "",
                &[],
                &Overrides {
                    portfolios: Some("13".into()),
                    ..o
                }
            ),
            Err(CliError::Config(_))
        ));
    }
}
