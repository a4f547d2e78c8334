//! CSV ingestion and emission for market panels and risk-free yields.
//!
//! The market schema is `date,stock_id,market_cap,total_return,delisted`
//! with ISO-8601 dates, a positive decimal capitalization that is empty on
//! a stock's delisting day, a decimal total return, and a 0/1 delisting
//! flag. Rows must be sorted by `(date, stock_id)`. Each stock must cover
//! a contiguous run of dates: a return missing in the middle of a stock's
//! life is rejected rather than silently bridged.
//!
//! The risk-free schema is `date,annual_yield` with strictly increasing
//! dates.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market::{MarketDataset, StockSeries};

const MARKET_HEADER: [&str; 5] = ["date", "stock_id", "market_cap", "total_return", "delisted"];
const RISK_FREE_HEADER: [&str; 2] = ["date", "annual_yield"];

fn csv_err(path: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn parse_date(path: &Path, line: u64, field: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .map_err(|_| csv_err(path, line, format!("bad date {field:?}, expected YYYY-MM-DD")))
}

fn parse_number(path: &Path, line: u64, name: &str, field: &str) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| csv_err(path, line, format!("bad {name} {field:?}")))?;
    if !value.is_finite() {
        return Err(csv_err(path, line, format!("non-finite {name} {field:?}")));
    }
    Ok(value)
}

fn check_header(path: &Path, actual: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let fields: Vec<&str> = actual.iter().collect();
    if fields != expected {
        return Err(csv_err(
            path,
            1,
            format!("header {fields:?}, expected {expected:?}"),
        ));
    }
    Ok(())
}

struct StockBuilder {
    first_day: usize,
    next_day: usize,
    caps: Vec<f64>,
    returns: Vec<f64>,
    closed: bool,
}

/// Loads a market panel, validating schema, ordering, contiguity, and
/// delisting consistency.
pub fn load_market_csv(path: impl AsRef<Path>) -> Result<MarketDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e.to_string()))?;
    check_header(path, reader.headers().map_err(|e| csv_err(path, 0, e.to_string()))?, &MARKET_HEADER)?;

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut stocks: std::collections::BTreeMap<String, StockBuilder> =
        std::collections::BTreeMap::new();
    let mut prev: Option<(NaiveDate, String)> = None;

    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != MARKET_HEADER.len() {
            return Err(csv_err(
                path,
                line,
                format!("{} fields, expected {}", record.len(), MARKET_HEADER.len()),
            ));
        }
        let date = parse_date(path, line, &record[0])?;
        let stock_id = record[1].to_string();
        if stock_id.is_empty() {
            return Err(csv_err(path, line, "empty stock_id"));
        }
        if let Some((prev_date, prev_id)) = &prev {
            if date < *prev_date {
                return Err(csv_err(path, line, format!("date {date} precedes {prev_date}")));
            }
            if date == *prev_date {
                match stock_id.as_str().cmp(prev_id.as_str()) {
                    std::cmp::Ordering::Equal => {
                        return Err(csv_err(
                            path,
                            line,
                            format!("duplicate row for ({date}, {stock_id})"),
                        ));
                    }
                    std::cmp::Ordering::Less => {
                        return Err(csv_err(
                            path,
                            line,
                            format!("rows not sorted by (date, stock_id) at {stock_id}"),
                        ));
                    }
                    std::cmp::Ordering::Greater => {}
                }
            }
        }
        prev = Some((date, stock_id.clone()));
        if dates.last() != Some(&date) {
            dates.push(date);
        }
        let day = dates.len() - 1;

        let cap = if record[2].is_empty() {
            None
        } else {
            let cap = parse_number(path, line, "market_cap", &record[2])?;
            if cap <= 0.0 {
                return Err(csv_err(path, line, format!("market_cap {cap} must be positive")));
            }
            Some(cap)
        };
        let total_return = parse_number(path, line, "total_return", &record[3])?;
        let delisted = match &record[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(csv_err(path, line, format!("delisted {other:?}, expected 0 or 1")));
            }
        };
        if delisted && cap.is_some() {
            return Err(csv_err(
                path,
                line,
                "delisting row must leave market_cap empty",
            ));
        }

        let builder = stocks.entry(stock_id.clone()).or_insert(StockBuilder {
            first_day: day,
            next_day: day,
            caps: Vec::new(),
            returns: Vec::new(),
            closed: false,
        });
        if builder.closed {
            return Err(csv_err(
                path,
                line,
                format!("{stock_id} has data after its delisting day"),
            ));
        }
        if day != builder.next_day {
            return Err(csv_err(
                path,
                line,
                format!("{stock_id} has a data gap before {date}"),
            ));
        }
        builder.next_day += 1;
        builder.returns.push(total_return);
        match cap {
            Some(cap) => builder.caps.push(cap),
            None => builder.closed = true,
        }
    }

    if dates.is_empty() {
        return Err(csv_err(path, 0, "no data rows"));
    }
    let last_day = dates.len() - 1;
    let mut series = Vec::with_capacity(stocks.len());
    for (id, builder) in stocks {
        // A cap missing anywhere but the final row would have closed the
        // builder early and tripped the gap check above, so a closed
        // builder is a genuine delisting.
        let delisted = builder.closed;
        if !delisted && builder.next_day - 1 < last_day {
            // Stock simply stops early without a delisting marker.
            return Err(Error::InvalidDataset {
                reason: format!(
                    "stock {id} ends on {} without a delisting row",
                    dates[builder.next_day - 1]
                ),
            });
        }
        series.push(StockSeries::new(
            id,
            builder.first_day,
            builder.caps,
            builder.returns,
            delisted,
        )?);
    }
    MarketDataset::new(dates, series)
}

/// Writes a market panel in the load schema, with numbers carrying 17
/// significant digits so a reload reproduces every value bit for bit.
pub fn write_market_csv(dataset: &MarketDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str("date,stock_id,market_cap,total_return,delisted\n");
    for (day, date) in dataset.dates().iter().enumerate() {
        for stock in dataset.stocks() {
            let Some(total_return) = stock.return_on(day) else {
                continue;
            };
            let delisting = stock.delist_day() == Some(day);
            let _ = match stock.cap_on(day) {
                Some(cap) => writeln!(out, "{date},{},{cap:.16e},{total_return:.16e},0", stock.id()),
                None if delisting => {
                    writeln!(out, "{date},{},,{total_return:.16e},1", stock.id())
                }
                None => continue,
            };
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Annualized risk-free yields quoted on (a subset of) trading dates.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeSeries {
    dates: Vec<NaiveDate>,
    yields: Vec<f64>,
}

impl RiskFreeSeries {
    pub fn new(dates: Vec<NaiveDate>, yields: Vec<f64>) -> Result<Self> {
        if dates.len() != yields.len() {
            return Err(Error::MisalignedPaths {
                reason: format!("{} dates but {} yields", dates.len(), yields.len()),
            });
        }
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidDataset {
                    reason: format!("risk-free dates not strictly increasing at {}", pair[1]),
                });
            }
        }
        for &y in &yields {
            if !y.is_finite() {
                return Err(Error::InvalidDataset {
                    reason: "non-finite risk-free yield".into(),
                });
            }
        }
        Ok(RiskFreeSeries { dates, yields })
    }

    /// An empty series; every lookup falls back to a zero yield.
    pub fn zero() -> Self {
        RiskFreeSeries {
            dates: Vec::new(),
            yields: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Latest quoted yield on or before `date`, zero if none exists.
    pub fn yield_at_or_before(&self, date: NaiveDate) -> f64 {
        match self.dates.partition_point(|&d| d <= date) {
            0 => 0.0,
            n => self.yields[n - 1],
        }
    }
}

/// Loads a risk-free yield series.
pub fn load_risk_free_csv(path: impl AsRef<Path>) -> Result<RiskFreeSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e.to_string()))?;
    check_header(path, reader.headers().map_err(|e| csv_err(path, 0, e.to_string()))?, &RISK_FREE_HEADER)?;
    let mut dates = Vec::new();
    let mut yields = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != RISK_FREE_HEADER.len() {
            return Err(csv_err(
                path,
                line,
                format!("{} fields, expected {}", record.len(), RISK_FREE_HEADER.len()),
            ));
        }
        dates.push(parse_date(path, line, &record[0])?);
        yields.push(parse_number(path, line, "annual_yield", &record[1])?);
    }
    RiskFreeSeries::new(dates, yields)
}
