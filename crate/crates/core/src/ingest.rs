//! Tick ingestion: parsing, futures contract rolling and previous-tick
//! sampling onto a fixed intraday grid.
//!
//! The tick file is comma separated with the header
//! `timestamp,price,volume,contract`; timestamps are ISO-8601 local exchange
//! time at minute or second precision (`2024-01-03T08:35` or
//! `2024-01-03T08:35:10`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::Serialize;

use crate::error::{Error, Result};

pub const TICK_HEADER: [&str; 4] = ["timestamp", "price", "volume", "contract"];
pub const CALENDAR_HEADER: &str = "excluded_date";

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub timestamp: NaiveDateTime,
    pub price: f64,
    pub volume: u64,
    /// Opaque delivery-month token, e.g. `H24`.
    pub contract: String,
}

impl TickRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Malformed lines are collected and skipped.
    #[default]
    Lenient,
    /// The first malformed line aborts parsing.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTicks {
    pub records: Vec<TickRecord>,
    pub errors: Vec<LineError>,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    if ts.second() == 0 && ts.nanosecond() == 0 {
        ts.format("%Y-%m-%dT%H:%M").to_string()
    } else {
        ts.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

fn parse_record(fields: &csv::StringRecord) -> std::result::Result<TickRecord, String> {
    if fields.len() != TICK_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            TICK_HEADER.len(),
            fields.len()
        ));
    }
    let timestamp =
        parse_timestamp(&fields[0]).ok_or_else(|| format!("bad timestamp `{}`", &fields[0]))?;
    let price: f64 = fields[1]
        .parse()
        .map_err(|_| format!("bad price `{}`", &fields[1]))?;
    if !(price.is_finite() && price > 0.0) {
        return Err(format!("price must be positive, got {price}"));
    }
    let volume: u64 = fields[2]
        .parse()
        .map_err(|_| format!("bad volume `{}`", &fields[2]))?;
    let contract = fields[3].to_string();
    if contract.is_empty() {
        return Err("empty contract id".into());
    }
    Ok(TickRecord {
        timestamp,
        price,
        volume,
        contract,
    })
}

/// Parses a tick file. Records come back in input order.
pub fn parse_ticks<R: Read>(input: R, mode: ParseMode) -> Result<ParsedTicks> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let header = reader.headers().map_err(|e| Error::BadHeader {
        expected: TICK_HEADER.join(","),
        found: e.to_string(),
    })?;
    if header.iter().ne(TICK_HEADER.iter().copied()) {
        return Err(Error::BadHeader {
            expected: TICK_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = ParsedTicks::default();
    let mut record = csv::StringRecord::new();
    loop {
        let (line, parsed) = match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                (line, parse_record(&record))
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                (line, Err(e.to_string()))
            }
        };
        match parsed {
            Ok(tick) => out.records.push(tick),
            Err(message) => {
                if mode == ParseMode::Strict {
                    return Err(Error::MalformedLine { line, message });
                }
                out.errors.push(LineError { line, message });
            }
        }
    }
    Ok(out)
}

pub fn write_ticks<W: Write>(output: W, ticks: &[TickRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(TICK_HEADER)?;
    for t in ticks {
        writer.write_record([
            format_timestamp(&t.timestamp),
            t.price.to_string(),
            t.volume.to_string(),
            t.contract.clone(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses an excluded-dates file (`excluded_date` header, one ISO date per
/// line). Any malformed line is fatal.
pub fn parse_calendar<R: Read>(input: R) -> Result<BTreeSet<NaiveDate>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?;
    if header.len() != 1 || &header[0] != CALENDAR_HEADER {
        return Err(Error::BadHeader {
            expected: CALENDAR_HEADER.into(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut dates = BTreeSet::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| {
            Error::MalformedLine {
                line,
                message: format!("bad date `{}`", &rec[0]),
            }
        })?;
        dates.insert(date);
    }
    Ok(dates)
}

/// Builds one continuous series from several delivery months.
///
/// On the first day the contract with the largest volume is active (ties go
/// to the contract seen first in the input). Afterwards the active contract
/// hands over to a successor on the first day the successor's daily volume
/// strictly exceeds the incumbent's. A retired contract never becomes active
/// again. Only the active contract's ticks are kept, sorted by time.
pub fn roll_contracts(ticks: &[TickRecord]) -> Vec<TickRecord> {
    let mut names: Vec<&str> = Vec::new();
    let mut contract_of: Vec<usize> = Vec::with_capacity(ticks.len());
    let mut volumes: BTreeMap<NaiveDate, BTreeMap<usize, u64>> = BTreeMap::new();

    for t in ticks {
        let idx = match names.iter().position(|n| *n == t.contract) {
            Some(i) => i,
            None => {
                names.push(&t.contract);
                names.len() - 1
            }
        };
        contract_of.push(idx);
        *volumes.entry(t.date()).or_default().entry(idx).or_insert(0) += t.volume;
    }

    let mut active_on: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    let mut retired = vec![false; names.len()];
    let mut active: Option<usize> = None;
    for (day, vols) in &volumes {
        let incumbent = match active {
            None => {
                // max_by_key returns the last maximum; scan for the first.
                let mut best = None::<(usize, u64)>;
                for (&c, &v) in vols {
                    if best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((c, v));
                    }
                }
                best.map(|(c, _)| c).expect("day has at least one contract")
            }
            Some(current) => {
                let current_vol = vols.get(&current).copied().unwrap_or(0);
                let mut best = None::<(usize, u64)>;
                for (&c, &v) in vols {
                    if c == current || retired[c] {
                        continue;
                    }
                    if best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((c, v));
                    }
                }
                match best {
                    Some((c, v)) if v > current_vol => {
                        retired[current] = true;
                        c
                    }
                    _ => current,
                }
            }
        };
        active = Some(incumbent);
        active_on.insert(*day, incumbent);
    }

    let mut out: Vec<TickRecord> = ticks
        .iter()
        .zip(&contract_of)
        .filter(|(t, c)| active_on.get(&t.date()) == Some(c))
        .map(|(t, _)| t.clone())
        .collect();
    out.sort_by_key(|t| t.timestamp);
    out
}

/// Trading session and sampling grid definition.
///
/// The session `[open, close]` is cut into bars of `interval_minutes`; the
/// grid points are the bar closes `open + k·interval` for `k = 1..=bars`, so
/// a session with `bars` bars yields `bars` prices and `bars − 1` returns.
/// The default 08:35–17:35 five-minute session has 108 grid points and 107
/// return intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCalendar {
    session_open: NaiveTime,
    session_close: NaiveTime,
    interval_minutes: u32,
    excluded_dates: BTreeSet<NaiveDate>,
    max_gap_intervals: usize,
}

impl Default for SessionCalendar {
    fn default() -> Self {
        Self {
            session_open: NaiveTime::from_hms_opt(8, 35, 0).unwrap(),
            session_close: NaiveTime::from_hms_opt(17, 35, 0).unwrap(),
            interval_minutes: 5,
            excluded_dates: BTreeSet::new(),
            max_gap_intervals: 12,
        }
    }
}

impl SessionCalendar {
    pub fn new(open: NaiveTime, close: NaiveTime, interval_minutes: u32) -> Result<Self> {
        if interval_minutes == 0 {
            return Err(Error::invalid("interval_minutes must be positive"));
        }
        if close <= open {
            return Err(Error::invalid(format!(
                "session close {close} must be after open {open}"
            )));
        }
        let minutes = (close - open).num_minutes();
        if (close - open).num_seconds() % 60 != 0 || minutes % i64::from(interval_minutes) != 0 {
            return Err(Error::invalid(format!(
                "session length {minutes} min is not a multiple of {interval_minutes} min"
            )));
        }
        if minutes / i64::from(interval_minutes) < 2 {
            return Err(Error::invalid("session must contain at least two bars"));
        }
        Ok(Self {
            session_open: open,
            session_close: close,
            interval_minutes,
            ..Self::default()
        })
    }

    /// A session starting at `open` sized to produce exactly `intervals`
    /// returns per day.
    pub fn for_intervals(open: NaiveTime, interval_minutes: u32, intervals: usize) -> Result<Self> {
        let span = i64::from(interval_minutes) * (intervals as i64 + 1);
        let (close, wrapped) = open.overflowing_add_signed(Duration::minutes(span));
        if wrapped != 0 || close <= open {
            return Err(Error::invalid(format!(
                "{intervals} intervals of {interval_minutes} min do not fit in one day"
            )));
        }
        Self::new(open, close, interval_minutes)
    }

    pub fn with_excluded_dates(mut self, dates: BTreeSet<NaiveDate>) -> Self {
        self.excluded_dates = dates;
        self
    }

    pub fn with_max_gap(mut self, intervals: usize) -> Self {
        self.max_gap_intervals = intervals;
        self
    }

    pub fn session_open(&self) -> NaiveTime {
        self.session_open
    }

    pub fn session_close(&self) -> NaiveTime {
        self.session_close
    }

    pub fn interval_minutes(&self) -> u32 {
        self.interval_minutes
    }

    pub fn excluded_dates(&self) -> &BTreeSet<NaiveDate> {
        &self.excluded_dates
    }

    pub fn max_gap_intervals(&self) -> usize {
        self.max_gap_intervals
    }

    pub fn grid_points(&self) -> usize {
        ((self.session_close - self.session_open).num_minutes() / i64::from(self.interval_minutes))
            as usize
    }

    /// Number of returns per day.
    pub fn intervals(&self) -> usize {
        self.grid_points() - 1
    }

    pub fn grid_times(&self) -> impl Iterator<Item = NaiveTime> + '_ {
        let step = Duration::minutes(i64::from(self.interval_minutes));
        (1..=self.grid_points() as i32).map(move |k| self.session_open + step * k)
    }
}

/// Per-day fixed-interval prices.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayGrid {
    days: Vec<NaiveDate>,
    prices: Vec<Vec<f64>>,
}

impl IntradayGrid {
    pub fn new(days: Vec<NaiveDate>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if days.len() != prices.len() {
            return Err(Error::Misaligned(format!(
                "{} days but {} price vectors",
                days.len(),
                prices.len()
            )));
        }
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid days must be strictly increasing"));
        }
        let width = prices.first().map_or(0, Vec::len);
        if width < 2 && !prices.is_empty() {
            return Err(Error::invalid("each day needs at least two grid prices"));
        }
        for (day, row) in days.iter().zip(&prices) {
            if row.len() != width {
                return Err(Error::Misaligned(format!(
                    "{day} has {} prices, expected {width}",
                    row.len()
                )));
            }
            if let Some(&price) = row.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
                return Err(Error::NonPositivePrice { day: *day, price });
            }
        }
        Ok(Self { days, prices })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Return intervals per day.
    pub fn intervals(&self) -> usize {
        self.prices.first().map_or(0, |p| p.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    Excluded,
    NoOpeningTrade,
    MaxGapExceeded { empty_intervals: usize },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::Excluded => f.write_str("excluded date"),
            DropReason::NoOpeningTrade => f.write_str("no trade at or before first grid point"),
            DropReason::MaxGapExceeded { empty_intervals } => {
                write!(f, "max-gap exceeded ({empty_intervals} empty intervals)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    #[serde(flatten)]
    pub reason: DropReason,
}

#[derive(Debug, Clone)]
pub struct GridBuild {
    pub grid: IntradayGrid,
    pub dropped: Vec<DroppedDay>,
}

fn sample_day(day: &[TickRecord], cal: &SessionCalendar) -> std::result::Result<Vec<f64>, DropReason> {
    let step = Duration::minutes(i64::from(cal.interval_minutes));
    let date = day[0].date();
    let mut prices = Vec::with_capacity(cal.grid_points());
    let mut cursor = 0usize;
    let mut last: Option<f64> = None;
    let mut run = 0usize;
    let mut worst_run = 0usize;

    for grid_time in cal.grid_times() {
        let grid_ts = date.and_time(grid_time);
        let bar_open = grid_ts - step;
        let mut traded = false;
        while cursor < day.len() && day[cursor].timestamp <= grid_ts {
            if day[cursor].timestamp > bar_open {
                traded = true;
            }
            last = Some(day[cursor].price);
            cursor += 1;
        }
        if traded {
            run = 0;
        } else {
            run += 1;
            worst_run = worst_run.max(run);
        }
        match last {
            Some(p) => prices.push(p),
            None => return Err(DropReason::NoOpeningTrade),
        }
    }
    if worst_run > cal.max_gap_intervals {
        return Err(DropReason::MaxGapExceeded {
            empty_intervals: worst_run,
        });
    }
    Ok(prices)
}

/// Samples a time-ordered tick series onto the session grid using the last
/// trade at or before each grid point. Days that are excluded, lack a price
/// at the first grid point, or contain more than the calendar's max-gap of
/// consecutive bars without trades are dropped and reported.
pub fn build_grid(ticks: &[TickRecord], cal: &SessionCalendar) -> Result<GridBuild> {
    if let Some(w) = ticks.windows(2).find(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Unordered(format_timestamp(&w[1].timestamp)));
    }

    let mut days = Vec::new();
    let mut prices = Vec::new();
    let mut dropped = Vec::new();
    for day in ticks.chunk_by(|a, b| a.date() == b.date()) {
        let date = day[0].date();
        if cal.excluded_dates.contains(&date) {
            dropped.push(DroppedDay {
                date,
                reason: DropReason::Excluded,
            });
            continue;
        }
        match sample_day(day, cal) {
            Ok(row) => {
                days.push(date);
                prices.push(row);
            }
            Err(reason) => dropped.push(DroppedDay { date, reason }),
        }
    }
    if days.is_empty() {
        return Err(Error::NoRetainedDays { dropped });
    }
    Ok(GridBuild {
        grid: IntradayGrid::new(days, prices)?,
        dropped,
    })
}
