use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for `quote_amount` against `price * base_qty`.
pub const RECONCILE_TOLERANCE: f64 = 1e-6;

/// One raw exchange trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeTick {
    pub timestamp_ms: i64,
    pub price: f64,
    pub base_qty: f64,
    pub quote_amount: f64,
}

impl TradeTick {
    /// Checks positivity and the amount reconciliation tolerance.
    pub fn is_valid(&self) -> bool {
        let finite =
            self.price.is_finite() && self.base_qty.is_finite() && self.quote_amount.is_finite();
        finite
            && self.price > 0.0
            && self.base_qty > 0.0
            && self.quote_amount > 0.0
            && (self.quote_amount - self.price * self.base_qty).abs()
                <= RECONCILE_TOLERANCE * self.quote_amount
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickField {
    Timestamp,
    Price,
    Qty,
    QuoteAmount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderMode {
    /// Skip the first line if its first field is not numeric.
    Auto,
    Present,
    Absent,
}

/// Column order and header handling of a tick stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickSchema {
    pub columns: [TickField; 4],
    pub header: HeaderMode,
}

impl Default for TickSchema {
    fn default() -> Self {
        Self {
            columns: [
                TickField::Timestamp,
                TickField::Price,
                TickField::Qty,
                TickField::QuoteAmount,
            ],
            header: HeaderMode::Auto,
        }
    }
}

/// Parsed ticks plus reject accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedTicks {
    pub ticks: Vec<TradeTick>,
    pub rejected: usize,
    pub total_lines: usize,
}

/// Parses a comma-separated tick stream.
///
/// Malformed records are counted in `rejected`; more than 1% rejected lines
/// is fatal. Output is stably sorted by timestamp.
pub fn parse_ticks<R: Read>(stream: R, schema: &TickSchema) -> Result<ParsedTicks> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(stream);

    let mut out = ParsedTicks::default();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.total_lines += 1;
                out.rejected += 1;
                first = false;
                continue;
            }
        }
        if first {
            first = false;
            let skip = match schema.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => record.get(0).is_none_or(|f| f.parse::<f64>().is_err()),
            };
            if skip {
                continue;
            }
        }
        out.total_lines += 1;
        match parse_record(&record, schema) {
            Some(tick) if tick.is_valid() => out.ticks.push(tick),
            _ => out.rejected += 1,
        }
    }

    if out.rejected * 100 > out.total_lines {
        return Err(Error::TooManyRejects {
            rejected: out.rejected,
            total: out.total_lines,
        });
    }
    if out.rejected > 0 {
        log::warn!(
            "rejected {} of {} tick lines",
            out.rejected,
            out.total_lines
        );
    }
    if !out
        .ticks
        .windows(2)
        .all(|w| w[0].timestamp_ms <= w[1].timestamp_ms)
    {
        out.ticks.sort_by_key(|t| t.timestamp_ms);
    }
    Ok(out)
}

fn parse_record(record: &csv::StringRecord, schema: &TickSchema) -> Option<TradeTick> {
    if record.len() != 4 {
        return None;
    }
    let mut tick = TradeTick {
        timestamp_ms: 0,
        price: 0.0,
        base_qty: 0.0,
        quote_amount: 0.0,
    };
    for (field, text) in schema.columns.iter().zip(record.iter()) {
        match field {
            TickField::Timestamp => tick.timestamp_ms = text.parse().ok()?,
            TickField::Price => tick.price = text.parse().ok()?,
            TickField::Qty => tick.base_qty = text.parse().ok()?,
            TickField::QuoteAmount => tick.quote_amount = text.parse().ok()?,
        }
    }
    Some(tick)
}

/// Reads and parses a tick file with the default schema.
pub fn read_tick_file(path: &Path) -> Result<ParsedTicks> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    parse_ticks(std::io::BufReader::new(file), &TickSchema::default())
}

/// Writes ticks as `timestamp_ms,price,qty,quote_amount` with a header.
pub fn write_ticks_csv<W: Write>(out: W, ticks: &[TradeTick]) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "timestamp_ms,price,qty,quote_amount")?;
    for t in ticks {
        writeln!(
            w,
            "{},{},{},{}",
            t.timestamp_ms, t.price, t.base_qty, t.quote_amount
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ParsedTicks> {
        parse_ticks(s.as_bytes(), &TickSchema::default())
    }

    #[test]
    fn maps_fields_directly() {
        let p = parse("1588032000000,7800.50,0.2,1560.10\n").unwrap();
        assert_eq!(
            p.ticks,
            vec![TradeTick {
                timestamp_ms: 1588032000000,
                price: 7800.50,
                base_qty: 0.2,
                quote_amount: 1560.10
            }]
        );
        assert_eq!(p.rejected, 0);
    }

    #[test]
    fn empty_stream() {
        let p = parse("").unwrap();
        assert!(p.ticks.is_empty());
        assert_eq!(p.rejected, 0);
    }

    #[test]
    fn sorts_out_of_order_lines() {
        let p = parse("2000,1,1,1\n1000,2,1,2\n").unwrap();
        let ts: Vec<i64> = p.ticks.iter().map(|t| t.timestamp_ms).collect();
        assert_eq!(ts, vec![1000, 2000]);
    }

    #[test]
    fn header_detected_and_skipped() {
        let p = parse("timestamp_ms,price,qty,quote_amount\n1000,2,1,2\n").unwrap();
        assert_eq!(p.ticks.len(), 1);
        assert_eq!(p.total_lines, 1);
    }

    #[test]
    fn custom_column_order() {
        let schema = TickSchema {
            columns: [
                TickField::Price,
                TickField::Qty,
                TickField::QuoteAmount,
                TickField::Timestamp,
            ],
            header: HeaderMode::Absent,
        };
        let p = parse_ticks("4,0.5,2,77\n".as_bytes(), &schema).unwrap();
        assert_eq!(p.ticks[0].timestamp_ms, 77);
        assert_eq!(p.ticks[0].price, 4.0);
    }

    #[test]
    fn rejects_counted_and_fatal_above_one_percent() {
        let mut good = String::new();
        for i in 0..199 {
            good.push_str(&format!("{i},1,1,1\n"));
        }
        let with_one_bad = format!("{good}5,-1,1,1\n");
        let p = parse(&with_one_bad).unwrap();
        assert_eq!(p.rejected, 1);
        assert_eq!(p.ticks.len(), 199);

        let with_three_bad = format!("{good}5,-1,1,1\n6,1,0,0\nnot,a,tick,line\n");
        assert!(matches!(
            parse(&with_three_bad),
            Err(Error::TooManyRejects { rejected: 3, .. })
        ));
    }

    #[test]
    fn unreconciled_amount_rejected() {
        let p = parse(&format!("{}1,2,3,7\n", "0,1,1,1\n".repeat(200))).unwrap();
        assert_eq!(p.rejected, 1);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let ticks = vec![
            TradeTick {
                timestamp_ms: 10,
                price: 101.25,
                base_qty: 0.1,
                quote_amount: 101.25 * 0.1,
            },
            TradeTick {
                timestamp_ms: 20,
                price: 1.0 / 3.0,
                base_qty: 3.0,
                quote_amount: 1.0,
            },
        ];
        let mut buf = Vec::new();
        write_ticks_csv(&mut buf, &ticks).unwrap();
        let p = parse_ticks(buf.as_slice(), &TickSchema::default()).unwrap();
        assert_eq!(p.ticks, ticks);
    }
}
