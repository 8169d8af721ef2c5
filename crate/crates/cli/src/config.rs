//! Key-value configuration: a text file of `key = value` lines, overlaid by
//! command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use absvol_core::ingest::SessionCalendar;
use absvol_core::powervar::Base;
use absvol_core::simulate::SpotVolModel;
use chrono::NaiveTime;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_POWERS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];
pub const DEFAULT_COVERAGES: [f64; 5] = [0.95, 0.96, 0.97, 0.98, 0.99];
pub const DEFAULT_VOL_MODEL: &str = "logou-cal:0.1,0.3,1.3";
pub const DEFAULT_SEED: u64 = 42;

/// Every key a config file may set. Keys that a command does not use are
/// ignored so one file can serve several commands.
const KNOWN_KEYS: &[&str] = &[
    "base",
    "bases",
    "calendar",
    "ci_level",
    "contract",
    "coverage",
    "days",
    "drift",
    "fine_steps",
    "format",
    "interval_minutes",
    "m",
    "max_gap",
    "max_lag",
    "out",
    "power",
    "powers",
    "seed",
    "session_close",
    "session_open",
    "start_price",
    "strict",
    "ticks",
    "vol_forecast",
    "vol_model",
];

fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

/// Raw settings before typing: config-file values with flags laid on top.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_file_contents(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':').filter(|(k, _)| !k.contains(' ')))
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = normalize_key(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_file_contents(&text)
    }

    /// Flags take precedence over file values.
    pub fn set_flag(&mut self, key: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.values.insert(normalize_key(key), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_value(key, v),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn require_path(&self, key: &str) -> CliResult<PathBuf> {
        self.raw(key)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .ok_or_else(|| CliError::usage(format!("`--{}` is required", key.replace('_', "-"))))
    }

    pub fn get_list<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> CliResult<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_list(key, v),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| CliError::usage(format!("invalid value `{v}` for `{key}`: {e}")))
}

/// Comma- or whitespace-separated list. An empty list is a usage error.
pub fn parse_list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::usage(format!("`{key}` must list at least one value")));
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err("expected `csv` or `json`".into()),
        }
    }
}

/// Session settings as recorded in sidecars.
#[derive(Debug, Clone, Serialize)]
pub struct SessionSettings {
    pub session_open: String,
    pub session_close: String,
    pub interval_minutes: u32,
    pub intervals: usize,
    pub max_gap: usize,
    pub excluded_dates: usize,
}

fn parse_time(key: &str, v: &str) -> CliResult<NaiveTime> {
    NaiveTime::parse_from_str(v, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(v, "%H:%M:%S"))
        .map_err(|_| CliError::usage(format!("invalid time `{v}` for `{key}`; expected HH:MM")))
}

/// Builds the session calendar. `m` (intervals per day), when given, fixes
/// the close; an explicit close that disagrees with it is an error.
pub fn session_calendar(s: &Settings) -> CliResult<SessionCalendar> {
    let default = SessionCalendar::default();
    let open = match s.raw("session_open") {
        Some(v) => parse_time("session_open", v)?,
        None => default.session_open(),
    };
    let interval: u32 = s.get("interval_minutes", default.interval_minutes())?;
    let close = s.raw("session_close").map(|v| parse_time("session_close", v)).transpose()?;
    let m: Option<usize> = s.get_opt("m")?;
    let cal = match (m, close) {
        (Some(m), close) => {
            let cal = SessionCalendar::for_intervals(open, interval, m).map_err(CliError::from)?;
            if let Some(c) = close {
                if c != cal.session_close() {
                    return Err(CliError::usage(format!(
                        "m = {m} with {interval}-minute bars from {} closes at {}, not {}",
                        open.format("%H:%M"),
                        cal.session_close().format("%H:%M"),
                        c.format("%H:%M")
                    )));
                }
            }
            cal
        }
        (None, close) => {
            SessionCalendar::new(open, close.unwrap_or(default.session_close()), interval).map_err(CliError::from)?
        }
    };
    let max_gap: usize = s.get("max_gap", default.max_gap_intervals())?;
    Ok(cal.with_max_gap(max_gap))
}

pub fn session_settings(cal: &SessionCalendar) -> SessionSettings {
    SessionSettings {
        session_open: cal.session_open().format("%H:%M").to_string(),
        session_close: cal.session_close().format("%H:%M").to_string(),
        interval_minutes: cal.interval_minutes(),
        intervals: cal.intervals(),
        max_gap: cal.max_gap_intervals(),
        excluded_dates: cal.excluded_dates().len(),
    }
}

pub fn parse_bases(s: &Settings) -> CliResult<Vec<Base>> {
    let mut bases: Vec<Base> = s.get_list("bases", &[Base::Absolute, Base::Squared])?;
    let mut seen = Vec::new();
    bases.retain(|b| {
        let fresh = !seen.contains(b);
        seen.push(*b);
        fresh
    });
    Ok(bases)
}

pub fn check_powers(key: &str, powers: &[f64]) -> CliResult<()> {
    match powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        Some(p) => Err(CliError::usage(format!("`{key}` values must be positive, got {p}"))),
        None => Ok(()),
    }
}

pub fn check_coverages(coverages: &[f64]) -> CliResult<()> {
    match coverages.iter().find(|c| !(**c > 0.5 && **c < 1.0)) {
        Some(c) => Err(CliError::usage(format!("coverage must lie in (0.5, 1), got {c}"))),
        None => Ok(()),
    }
}

/// `constant:SIGMA`, `logou:KAPPA,THETA,XI` or `logou-cal:KAPPA,XI,TARGET`
/// (θ chosen so that the root mean square of σ equals `TARGET`).
pub fn parse_vol_model(v: &str) -> CliResult<SpotVolModel> {
    let bad = || {
        CliError::usage(format!(
            "invalid vol model `{v}`; expected constant:SIGMA, logou:KAPPA,THETA,XI or logou-cal:KAPPA,XI,TARGET"
        ))
    };
    let (name, args) = v.trim().split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match (name.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
        ("constant", &[sigma]) => Ok(SpotVolModel::Constant { sigma }),
        ("logou", &[kappa, theta, xi]) => Ok(SpotVolModel::LogOu { kappa, theta, xi }),
        ("logou-cal" | "logou_cal", &[kappa, xi, target]) => Ok(SpotVolModel::log_ou_calibrated(kappa, xi, target)),
        _ => Err(bad()),
    }
}
