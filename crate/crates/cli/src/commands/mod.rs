pub mod analyze;
pub mod convergence;
pub mod mincap;
pub mod simulate;

use std::fs::File;
use std::path::PathBuf;

use absvol_core::ingest::{
    build_grid, parse_calendar, parse_ticks, roll_contracts, DropReason, DroppedDay, LineError, ParseMode,
    SessionCalendar,
};
use absvol_core::returns::{intraday_log_returns, IntradayReturns};
use serde::Serialize;

use crate::config::{session_calendar, session_settings, Format, SessionSettings, Settings};
use crate::error::{CliError, CliResult};
use crate::output::Table;

/// Input side of the effective configuration.
#[derive(Debug, Clone, Serialize)]
pub struct InputSettings {
    pub ticks: String,
    pub calendar: Option<String>,
    pub strict: bool,
    pub session: SessionSettings,
}

pub struct Ingested {
    pub settings: InputSettings,
    pub intra: IntradayReturns,
    pub dropped: Vec<DroppedDay>,
    pub line_errors: Vec<LineError>,
}

/// Session and input checks that need no file access.
pub fn input_plan(s: &Settings) -> CliResult<(PathBuf, Option<PathBuf>, bool, SessionCalendar)> {
    let ticks = s.require_path("ticks")?;
    let calendar = s.raw("calendar").filter(|v| !v.is_empty()).map(PathBuf::from);
    let strict: bool = s.get("strict", false)?;
    let cal = session_calendar(s)?;
    Ok((ticks, calendar, strict, cal))
}

/// Tick file → rolled continuous series → grid → intraday returns.
pub fn ingest(ticks: PathBuf, calendar: Option<PathBuf>, strict: bool, cal: SessionCalendar) -> CliResult<Ingested> {
    let cal = match &calendar {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            let dates = parse_calendar(file).map_err(|e| CliError::from_core(e, Some(path)))?;
            cal.with_excluded_dates(dates)
        }
        None => cal,
    };
    let file = File::open(&ticks).map_err(|e| CliError::io(&ticks, e))?;
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let parsed = parse_ticks(file, mode).map_err(|e| CliError::from_core(e, Some(&ticks)))?;
    if parsed.records.is_empty() {
        return Err(CliError::data(format!("{}: no valid tick records", ticks.display())));
    }
    let rolled = roll_contracts(&parsed.records);
    let build = build_grid(&rolled, &cal).map_err(|e| CliError::from_core(e, Some(&ticks)))?;
    let intra = intraday_log_returns(&build.grid)?;
    Ok(Ingested {
        settings: InputSettings {
            ticks: ticks.display().to_string(),
            calendar: calendar.map(|c| c.display().to_string()),
            strict,
            session: session_settings(&cal),
        },
        intra,
        dropped: build.dropped,
        line_errors: parsed.errors,
    })
}

pub fn dropped_table(dropped: &[DroppedDay]) -> Table {
    let mut t = Table::new("dropped_days", &["day", "reason", "empty_intervals"]);
    for d in dropped {
        let (reason, gap) = match d.reason {
            DropReason::Excluded => ("excluded", None),
            DropReason::NoOpeningTrade => ("no_opening_trade", None),
            DropReason::MaxGapExceeded { empty_intervals } => ("max_gap_exceeded", Some(empty_intervals)),
        };
        t.push(vec![d.date.to_string().into(), reason.into(), gap.into()]);
    }
    t
}

pub fn line_error_table(errors: &[LineError]) -> Table {
    let mut t = Table::new("line_errors", &["line", "message"]);
    for e in errors {
        t.push(vec![e.line.into(), e.message.clone().into()]);
    }
    t
}

/// Output side of the effective configuration.
#[derive(Debug, Clone, Serialize)]
pub struct OutputSettings {
    pub out: String,
    pub format: Format,
}

pub fn output_settings(s: &Settings) -> CliResult<(PathBuf, Format, OutputSettings)> {
    let out = PathBuf::from(s.raw("out").filter(|v| !v.is_empty()).unwrap_or("absvol-out"));
    let format: Format = s.get("format", Format::Csv)?;
    let settings = OutputSettings {
        out: out.display().to_string(),
        format,
    };
    Ok((out, format, settings))
}

pub fn finish(command: &str, dir: &std::path::Path, files: usize) {
    println!("{command}: wrote {files} files to {}", dir.display());
}
