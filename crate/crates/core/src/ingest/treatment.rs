use serde::{Deserialize, Serialize};

use super::bars::DayBars;
use crate::error::{Error, Result};
use crate::stats::percentile_sorted;

/// Multipliers applied to the third and fourth amount quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub q3_multiplier: f64,
    pub q4_multiplier: f64,
    pub enabled: bool,
}

impl Default for TreatmentSpec {
    fn default() -> Self {
        Self {
            q3_multiplier: 0.5,
            q4_multiplier: 0.25,
            enabled: true,
        }
    }
}

impl TreatmentSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.q4_multiplier
            && self.q4_multiplier <= self.q3_multiplier
            && self.q3_multiplier <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "treatment multipliers must satisfy 0 <= q4 <= q3 <= 1 (got q3={}, q4={})",
                self.q3_multiplier, self.q4_multiplier
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreatmentOutcome {
    Applied {
        p50: f64,
        p75: f64,
    },
    /// Fewer than four positive-amount minutes; amounts left unchanged.
    Degenerate {
        positive_minutes: usize,
    },
    Disabled,
}

/// Scales minute amounts above the day's median of positive amounts.
///
/// Minutes in `(P50, P75]` are multiplied by `q3_multiplier` and minutes
/// above `P75` by `q4_multiplier`. Returns are untouched. The output is
/// flagged as treated; treating it again is an error.
pub fn apply_wash_treatment(
    day: &DayBars,
    spec: &TreatmentSpec,
) -> Result<(DayBars, TreatmentOutcome)> {
    spec.validate()?;
    if day.treated {
        return Err(Error::AlreadyTreated);
    }
    let mut out = day.clone();
    if !spec.enabled {
        return Ok((out, TreatmentOutcome::Disabled));
    }
    out.treated = true;

    let mut positive: Vec<f64> = day
        .bars
        .iter()
        .map(|b| b.amount)
        .filter(|&a| a > 0.0)
        .collect();
    if positive.len() < 4 {
        log::warn!(
            "day {}: only {} positive-amount minutes, treatment skipped",
            day.day_index,
            positive.len()
        );
        return Ok((
            out,
            TreatmentOutcome::Degenerate {
                positive_minutes: positive.len(),
            },
        ));
    }
    positive.sort_by(f64::total_cmp);
    let p50 = percentile_sorted(&positive, 0.5);
    let p75 = percentile_sorted(&positive, 0.75);
    for b in &mut out.bars {
        if b.amount > p75 {
            b.amount *= spec.q4_multiplier;
        } else if b.amount > p50 {
            b.amount *= spec.q3_multiplier;
        }
    }
    Ok((out, TreatmentOutcome::Applied { p50, p75 }))
}
