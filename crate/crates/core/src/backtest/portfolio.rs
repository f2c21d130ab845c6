use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the zero-return asset held by mean-variance portfolios.
pub const RISKFREE_ASSET: &str = "USDT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioKind {
    Equal,
    Market,
    LiquidityWeight,
    InverseLiquidityWeight,
    MvStandard,
    MvForecast,
}

impl PortfolioKind {
    pub fn is_mean_variance(self) -> bool {
        matches!(self, Self::MvStandard | Self::MvForecast)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    With,
    Without,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnBasis {
    Regular,
    LiquidityAdjusted,
}

/// One of the twelve portfolios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub id: u8,
    pub kind: PortfolioKind,
    pub treatment: Treatment,
    pub basis: ReturnBasis,
}

const fn spec(
    id: u8,
    kind: PortfolioKind,
    treatment: Treatment,
    basis: ReturnBasis,
) -> PortfolioSpec {
    PortfolioSpec {
        id,
        kind,
        treatment,
        basis,
    }
}

const CATALOG: [PortfolioSpec; 12] = {
    use PortfolioKind::*;
    use ReturnBasis::*;
    use Treatment::*;
    [
        spec(1, Equal, NotApplicable, Regular),
        spec(2, Market, NotApplicable, Regular),
        spec(3, LiquidityWeight, With, Regular),
        spec(4, LiquidityWeight, Without, Regular),
        spec(5, InverseLiquidityWeight, With, Regular),
        spec(6, InverseLiquidityWeight, Without, Regular),
        spec(7, MvStandard, NotApplicable, Regular),
        spec(8, MvStandard, With, LiquidityAdjusted),
        spec(9, MvStandard, Without, LiquidityAdjusted),
        spec(10, MvForecast, NotApplicable, Regular),
        spec(11, MvForecast, With, LiquidityAdjusted),
        spec(12, MvForecast, Without, LiquidityAdjusted),
    ]
};

impl PortfolioSpec {
    pub fn catalog() -> &'static [PortfolioSpec; 12] {
        &CATALOG
    }

    pub fn by_id(id: u8) -> Result<Self> {
        CATALOG
            .iter()
            .copied()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::InvalidInput(format!("portfolio id {id} outside 1..=12")))
    }

    /// Short column label.
    pub fn label(&self) -> &'static str {
        match self.id {
            1 => "Equal weight",
            2 => "Market",
            3 => "Liquidity weight, treated",
            4 => "Liquidity weight, untreated",
            5 => "Inverse liquidity weight, treated",
            6 => "Inverse liquidity weight, untreated",
            7 => "TMV",
            8 => "LAMV, treated",
            9 => "LAMV, untreated",
            10 => "TMV, forecast",
            11 => "LAMV, treated, forecast",
            _ => "LAMV, untreated, forecast",
        }
    }

    /// Whether the portfolio reads treated day records.
    pub fn uses_treated(&self) -> bool {
        self.treatment == Treatment::With
    }
}

/// Parses `1,2,7-12` style lists into sorted unique ids.
pub fn parse_portfolio_list(s: &str) -> Result<Vec<u8>> {
    let bad = || Error::InvalidInput(format!("bad portfolio list '{s}'"));
    let mut ids = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (
                a.trim().parse::<u8>().map_err(|_| bad())?,
                b.trim().parse::<u8>().map_err(|_| bad())?,
            ),
            None => {
                let v = part.parse::<u8>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        for id in lo..=hi {
            PortfolioSpec::by_id(id)?;
            ids.push(id);
        }
    }
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(bad());
    }
    Ok(ids)
}
