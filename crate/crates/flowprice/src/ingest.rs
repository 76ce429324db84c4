//! CSV ingestion of trades and top-of-book snapshots.
//!
//! Timestamps are integer nanoseconds since the epoch or ISO-8601 strings.
//! The first data row fixes the format for the whole file. ISO-8601 values
//! without an offset are read as UTC.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use flowprice_core::orderflow::{BookSnapshot, Side, TradeEvent};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    Nanos,
    Iso8601,
}

/// A rejected row, by 1-based line number (the header is line 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowIssue {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested<T> {
    /// Accepted rows, stably sorted by timestamp.
    pub rows: Vec<T>,
    pub skipped: Vec<RowIssue>,
    pub format: Option<TimestampFormat>,
}

pub const TRADE_COLUMNS: [&str; 4] = ["ts", "price", "volume", "side"];
pub const BOOK_COLUMNS: [&str; 5] = ["ts", "bid_px", "bid_qty", "ask_px", "ask_qty"];

fn detect(raw: &str) -> TimestampFormat {
    let body = raw.strip_prefix('-').unwrap_or(raw);
    if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        TimestampFormat::Nanos
    } else {
        TimestampFormat::Iso8601
    }
}

/// Parses an ISO-8601 timestamp to nanoseconds since the epoch.
pub fn parse_iso(raw: &str) -> std::result::Result<i64, String> {
    let nanos = |dt: NaiveDateTime| {
        dt.and_utc()
            .timestamp_nanos_opt()
            .ok_or_else(|| format!("timestamp {raw:?} out of range"))
    };
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return nanos(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return nanos(dt);
        }
    }
    Err(format!("cannot parse timestamp {raw:?}"))
}

/// Parses a timestamp given as nanoseconds or ISO-8601.
pub fn parse_timestamp(raw: &str) -> std::result::Result<i64, String> {
    match detect(raw) {
        TimestampFormat::Nanos => raw.parse().map_err(|_| format!("bad timestamp {raw:?}")),
        TimestampFormat::Iso8601 => parse_iso(raw),
    }
}

fn number(raw: &str, name: &str) -> std::result::Result<f64, String> {
    if raw.is_empty() {
        return Err(format!("missing {name}"));
    }
    let v: f64 = raw.parse().map_err(|_| format!("bad {name} {raw:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {name}"));
    }
    Ok(v)
}

struct Reader {
    name: String,
    records: csv::StringRecordsIntoIter<File>,
    index: HashMap<&'static str, usize>,
    format: Option<TimestampFormat>,
}

impl Reader {
    fn open(path: &Path, columns: &[&'static str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| CliError::MissingInput {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(file);
        let header = rdr.headers().map_err(|e| CliError::Validation {
            file: name.clone(),
            line: 1,
            reason: e.to_string(),
        })?;
        let mut index = HashMap::new();
        for &c in columns {
            let pos = header.iter().position(|h| h == c).ok_or_else(|| CliError::Validation {
                file: name.clone(),
                line: 1,
                reason: format!("header lacks column {c:?} (expected {})", columns.join(",")),
            })?;
            index.insert(c, pos);
        }
        Ok(Reader { name, records: rdr.into_records(), index, format: None })
    }

    fn ts(&mut self, raw: &str) -> std::result::Result<i64, String> {
        let f = detect(raw);
        match self.format {
            None => self.format = Some(f),
            Some(prev) if prev != f => return Err(format!("timestamp {raw:?} mixes formats within the file")),
            Some(_) => {}
        }
        parse_timestamp(raw)
    }

    /// Runs `parse` on every row, collecting or failing on rejects.
    fn run<T>(
        mut self,
        skip_bad: bool,
        mut parse: impl FnMut(&mut Self, &dyn Fn(&str) -> String) -> std::result::Result<T, String>,
        ts: impl Fn(&T) -> i64,
    ) -> Result<Ingested<T>> {
        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        let index = std::mem::take(&mut self.index);
        while let Some(rec) = self.records.next() {
            let (line, outcome) = match rec {
                Ok(r) => {
                    let line = r.position().map_or(0, |p| p.line());
                    let get = |c: &str| r.get(index[c]).unwrap_or("").to_string();
                    (line, parse(&mut self, &get))
                }
                Err(e) => (e.position().map_or(0, |p| p.line()), Err(e.to_string())),
            };
            match outcome {
                Ok(v) => rows.push(v),
                Err(reason) if skip_bad => skipped.push(RowIssue { line, reason }),
                Err(reason) => return Err(CliError::Validation { file: self.name, line, reason }),
            }
        }
        rows.sort_by_key(|r| ts(r));
        Ok(Ingested { rows, skipped, format: self.format })
    }
}

pub fn read_trades(path: &Path, skip_bad: bool) -> Result<Ingested<TradeEvent>> {
    Reader::open(path, &TRADE_COLUMNS)?.run(
        skip_bad,
        |r, get| {
            let ts = r.ts(&get("ts"))?;
            let side = match get("side").as_str() {
                "B" => Side::Buy,
                "S" => Side::Sell,
                other => return Err(format!("side {other:?} is not B or S")),
            };
            let e = TradeEvent {
                ts,
                price: number(&get("price"), "price")?,
                volume: number(&get("volume"), "volume")?,
                side,
            };
            e.validate().map_err(|e| e.to_string())?;
            Ok(e)
        },
        |e| e.ts,
    )
}

pub fn read_book(path: &Path, skip_bad: bool) -> Result<Ingested<BookSnapshot>> {
    Reader::open(path, &BOOK_COLUMNS)?.run(
        skip_bad,
        |r, get| {
            let s = BookSnapshot {
                ts: r.ts(&get("ts"))?,
                bid_px: number(&get("bid_px"), "bid_px")?,
                bid_qty: number(&get("bid_qty"), "bid_qty")?,
                ask_px: number(&get("ask_px"), "ask_px")?,
                ask_qty: number(&get("ask_qty"), "ask_qty")?,
            };
            s.validate().map_err(|e| e.to_string())?;
            Ok(s)
        },
        |s| s.ts,
    )
}
