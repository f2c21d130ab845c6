use serde::{Deserialize, Serialize};

use super::DailyRecord;
use crate::error::{Error, Result};
use crate::stats::{mean, percentile_sorted, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    Jump,
    Diffusion,
}

impl BetaKind {
    pub fn select(self, rec: &DailyRecord) -> f64 {
        match self {
            Self::Jump => rec.beta_jump,
            Self::Diffusion => rec.beta_diff,
        }
    }
}

/// Descriptive statistics of daily betas. Percentages are in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub days_at_max: usize,
    pub pct_days_at_max: f64,
    /// Share of the beta sum carried by capped days, in percent.
    pub weight_in_beta: f64,
    pub days_ge_mean: usize,
    pub pct_days_ge_mean: f64,
    pub days_ge_1: usize,
    pub pct_days_ge_1: f64,
    pub days_le_0_1: usize,
    pub pct_days_le_0_1: f64,
}

impl BetaStats {
    /// Rows in table order with their printed labels.
    pub fn table_rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("count", self.count as f64),
            ("mean", self.mean),
            ("std", self.std),
            ("min", self.min),
            ("25%", self.p25),
            ("50% (median)", self.median),
            ("75%", self.p75),
            ("max", self.max),
            ("highest days (= max)", self.days_at_max as f64),
            ("% of total days", self.pct_days_at_max),
            ("weight in beta", self.weight_in_beta),
            ("highest days (>= mean)", self.days_ge_mean as f64),
            ("% of total days", self.pct_days_ge_mean),
            ("highest days (>= 1)", self.days_ge_1 as f64),
            ("% of total days", self.pct_days_ge_1),
            ("lowest days (<= 0.10)", self.days_le_0_1 as f64),
            ("% of total days", self.pct_days_le_0_1),
        ]
    }

    /// JSON array of `[label, value]` pairs.
    pub fn to_table_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.table_rows()
                .into_iter()
                .map(|(label, v)| serde_json::json!([label, v]))
                .collect(),
        )
    }
}

/// Statistics of a beta sample; `cap` identifies days at the maximum.
pub fn beta_stats(betas: &[f64], cap: f64) -> Result<BetaStats> {
    if betas.is_empty() {
        return Err(Error::InvalidInput(
            "beta statistics need at least one day".into(),
        ));
    }
    let n = betas.len();
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = mean(betas);
    let total: f64 = betas.iter().sum();
    let days_at_max = betas.iter().filter(|&&b| b >= cap).count();
    let days_ge_mean = betas.iter().filter(|&&b| b >= m).count();
    let days_ge_1 = betas.iter().filter(|&&b| b >= 1.0).count();
    let days_le_0_1 = betas.iter().filter(|&&b| b <= 0.1).count();
    Ok(BetaStats {
        count: n,
        mean: m,
        std: if n > 1 { sample_std(betas) } else { 0.0 },
        min: sorted[0],
        p25: percentile_sorted(&sorted, 0.25),
        median: percentile_sorted(&sorted, 0.5),
        p75: percentile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
        days_at_max,
        pct_days_at_max: pct(days_at_max),
        weight_in_beta: if total > 0.0 {
            100.0 * days_at_max as f64 * cap / total
        } else {
            0.0
        },
        days_ge_mean,
        pct_days_ge_mean: pct(days_ge_mean),
        days_ge_1,
        pct_days_ge_1: pct(days_ge_1),
        days_le_0_1,
        pct_days_le_0_1: pct(days_le_0_1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capped_weight() {
        let s = beta_stats(&[10.0, 10.0, 5.0, 5.0], 10.0).unwrap();
        assert_eq!(s.days_at_max, 2);
        assert!((s.weight_in_beta - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.pct_days_at_max, 50.0);
    }

    #[test]
    fn constant_betas() {
        let s = beta_stats(&[1.0; 9], 10.0).unwrap();
        assert_eq!((s.mean, s.median, s.std), (1.0, 1.0, 0.0));
        assert_eq!(s.days_ge_1, 9);
        assert_eq!(s.days_ge_mean, 9);
        assert_eq!(s.pct_days_ge_1, 100.0);
        assert_eq!(s.days_at_max, 0);
    }

    #[test]
    fn empty_is_error() {
        assert!(beta_stats(&[], 10.0).is_err());
    }

    #[test]
    fn quantiles_and_low_days() {
        let s = beta_stats(&[0.05, 0.1, 0.8, 1.2, 3.0], 10.0).unwrap();
        assert_eq!(s.min, 0.05);
        assert_eq!(s.median, 0.8);
        assert_eq!(s.p25, 0.1);
        assert_eq!(s.p75, 1.2);
        assert_eq!(s.days_le_0_1, 2);
        assert_eq!(s.days_ge_1, 2);
        let m = (0.05 + 0.1 + 0.8 + 1.2 + 3.0) / 5.0;
        let v = [0.05, 0.1, 0.8, 1.2, 3.0]
            .iter()
            .map(|x: &f64| (x - m).powi(2))
            .sum::<f64>()
            / 4.0;
        assert!((s.std - v.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn table_labels_in_order() {
        let s = beta_stats(&[1.0, 2.0], 10.0).unwrap();
        let rows = s.table_rows();
        assert_eq!(rows.len(), 17);
        assert_eq!(rows[4].0, "25%");
        assert_eq!(rows[10].0, "weight in beta");
        let json = s.to_table_json();
        assert_eq!(json[0][0], "count");
        assert_eq!(json[0][1], 2.0);
    }
}
