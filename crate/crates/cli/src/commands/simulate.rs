//! Simulated stochastic-volatility prices exported as a tick file, with the
//! integrated truth alongside.

use absvol_core::ingest::{write_ticks, SessionCalendar, TICK_HEADER};
use absvol_core::simulate::{simulate_sv, to_ticks, SvConfig};
use chrono::NaiveTime;
use serde::Serialize;

use super::{output_settings, OutputSettings};
use crate::config::{
    check_powers, parse_vol_model, session_settings, SessionSettings, Settings, DEFAULT_POWERS, DEFAULT_SEED,
    DEFAULT_VOL_MODEL,
};
use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, Table};

pub const DEFAULT_DAYS: usize = 1000;

#[derive(Debug, Serialize)]
struct SimulateConfig {
    vol_model: String,
    sv: SvConfig,
    powers: Vec<f64>,
    start_price: f64,
    contract: String,
    session: SessionSettings,
    #[serde(flatten)]
    output: OutputSettings,
}

pub fn sv_config(s: &Settings, m: usize, fine: usize) -> CliResult<(String, SvConfig)> {
    let model_text = s.raw("vol_model").unwrap_or(DEFAULT_VOL_MODEL).to_string();
    let config = SvConfig {
        days: s.get("days", DEFAULT_DAYS)?,
        intervals_m: m,
        fine_steps_per_interval: fine,
        spot_vol_model: parse_vol_model(&model_text)?,
        drift: s.get("drift", 0.0)?,
        seed: s.get("seed", DEFAULT_SEED)?,
    };
    config.validate()?;
    Ok((model_text, config))
}

pub fn run(s: &Settings) -> CliResult<()> {
    let m: usize = s.get("m", 107)?;
    let fine: usize = s.get("fine_steps", 10)?;
    let (vol_model, sv) = sv_config(s, m, fine)?;
    let powers: Vec<f64> = s.get_list("powers", &DEFAULT_POWERS)?;
    check_powers("powers", &powers)?;
    let start_price: f64 = s.get("start_price", 5000.0)?;
    let contract = s.raw("contract").unwrap_or("SIM").to_string();
    if contract.is_empty() || contract.contains([',', '"', '\n']) {
        return Err(CliError::usage("contract must be a non-empty token without commas or quotes"));
    }
    let open = match s.raw("session_open") {
        Some(v) => NaiveTime::parse_from_str(v, "%H:%M")
            .map_err(|_| CliError::usage(format!("invalid time `{v}` for `session_open`")))?,
        None => SessionCalendar::default().session_open(),
    };
    let interval: u32 = s.get("interval_minutes", SessionCalendar::default().interval_minutes())?;
    let cal = SessionCalendar::for_intervals(open, interval, m)?;
    let (out, format, output) = output_settings(s)?;

    let sim = simulate_sv(&sv, &powers)?;
    let ticks = to_ticks(&sim.returns, &cal, start_price, &contract)?;

    let config = SimulateConfig {
        vol_model,
        sv,
        powers,
        start_price,
        contract,
        session: session_settings(&cal),
        output,
    };
    let mut dir = OutputDir::create(&out, format, "simulate", &config)?;
    let mut bytes = Vec::new();
    write_ticks(&mut bytes, &ticks)?;
    dir.write_raw("ticks.csv", &bytes, &TICK_HEADER, ticks.len())?;

    let mut t = Table::new("truth", &["day", "power", "value"]);
    for (i, day) in sim.returns.days().iter().enumerate() {
        let day = day.to_string();
        for ip in &sim.true_integrated {
            t.push(vec![day.clone().into(), ip.p.into(), ip.values[i].into()]);
        }
    }
    dir.write(&t)?;

    println!(
        "simulated {} days x {m} intervals ({} fine steps/day), seed {}; session {}-{}",
        sv.days,
        sv.fine_steps_per_day(),
        sv.seed,
        cal.session_open().format("%H:%M"),
        cal.session_close().format("%H:%M")
    );
    if m != SessionCalendar::default().intervals() {
        println!("analyze this output with --m {m}");
    }
    super::finish("simulate", &out, dir.written().len());
    Ok(())
}
