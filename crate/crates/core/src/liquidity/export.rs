use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::DailyRecord;
use crate::error::{Error, Result};

/// One row of the per-day jump/diffusion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaTableRow {
    pub day: usize,
    pub r_daily: f64,
    pub r_daily_adj: f64,
    pub sigma_daily: f64,
    pub sigma_daily_adj: f64,
    pub beta_jump: f64,
    pub beta_diff: f64,
}

pub fn beta_table_rows(records: &[DailyRecord]) -> Vec<BetaTableRow> {
    records
        .iter()
        .map(|r| BetaTableRow {
            day: r.day_index,
            r_daily: r.r_daily,
            r_daily_adj: r.r_daily_adj,
            sigma_daily: r.sigma_daily,
            sigma_daily_adj: r.sigma_daily_adj,
            beta_jump: r.beta_jump,
            beta_diff: r.beta_diff,
        })
        .collect()
}

const HEADER: &str = "day,r_daily,r_daily_adj,sigma_daily,sigma_daily_adj,beta_jump,beta_diff";

/// Writes rows with 12 significant digits.
pub fn write_beta_table_csv<W: Write>(out: W, rows: &[BetaTableRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "{HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            r.day,
            r.r_daily,
            r.r_daily_adj,
            r.sigma_daily,
            r.sigma_daily_adj,
            r.beta_jump,
            r.beta_diff
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_beta_table_csv<R: Read>(input: R) -> Result<Vec<BetaTableRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(Error::InvalidInput(format!(
            "unexpected beta table header: {headers:?}"
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
