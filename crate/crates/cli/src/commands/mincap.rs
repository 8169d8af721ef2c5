//! Minimum capital requirements for long and short positions across a
//! coverage list.

use absvol_core::mincap::{mincap_table, vol_forecast, MincapEstimate, MincapRequest, Position, VolForecastRule};
use absvol_core::powervar::{standardize, volatility_proxy, Base, PowerVariationSpec};
use absvol_core::returns::daily_return;
use serde::Serialize;

use super::{dropped_table, ingest, input_plan, line_error_table, output_settings, InputSettings, OutputSettings};
use crate::config::{check_coverages, check_powers, Settings, DEFAULT_COVERAGES};
use crate::error::{CliError, CliResult};
use crate::output::{render, Cell, OutputDir, Table};

#[derive(Debug, Serialize)]
struct MincapConfig {
    #[serde(flatten)]
    input: InputSettings,
    base: Base,
    power: f64,
    coverage: Vec<f64>,
    vol_forecast: VolForecastRule,
    ci_level: f64,
    #[serde(flatten)]
    output: OutputSettings,
}

pub const COLUMNS: [&str; 7] = ["position", "coverage", "lambda", "ci_low", "ci_high", "z_q", "sigma_hat"];

pub fn run(s: &Settings) -> CliResult<()> {
    let mut coverage: Vec<f64> = s.get_list("coverage", &DEFAULT_COVERAGES)?;
    check_coverages(&coverage)?;
    coverage.sort_by(f64::total_cmp);
    coverage.dedup();
    let base: Base = s.get("base", Base::Absolute)?;
    let power: f64 = s.get("power", 1.0)?;
    check_powers("power", &[power])?;
    let vol_rule: VolForecastRule = s.get("vol_forecast", VolForecastRule::LastDay)?;
    let ci_level: f64 = s.get("ci_level", 0.95)?;
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(CliError::usage(format!("ci_level must lie in (0, 1), got {ci_level}")));
    }
    let (out, format, output) = output_settings(s)?;
    let (ticks, calendar, strict, cal) = input_plan(s)?;

    let data = ingest(ticks, calendar, strict, cal)?;
    let intra = &data.intra;
    let spec = PowerVariationSpec::new(base, power, intra.intervals());
    let vol = volatility_proxy(intra, &spec)?;
    let z = standardize(&daily_return(intra), &vol)?.series.z;
    let sigma_hat = vol_forecast(&vol, vol_rule)?;
    let template = MincapRequest {
        vol_forecast_rule: vol_rule,
        ci_level,
        ..MincapRequest::new(coverage[0], Position::Long, spec)
    };
    let estimates = mincap_table(&z, sigma_hat, &coverage, &template)?;

    let config = MincapConfig {
        input: data.settings.clone(),
        base,
        power,
        coverage: coverage.clone(),
        vol_forecast: vol_rule,
        ci_level,
        output,
    };
    let mut dir = OutputDir::create(&out, format, "mincap", &config)?;
    let mut t = Table::new("mincap", &COLUMNS);
    for e in &estimates {
        t.push(vec![
            e.position.as_str().into(),
            e.coverage.into(),
            e.lambda.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            e.z_quantile_used.into(),
            e.sigma_forecast_used.into(),
        ]);
    }
    dir.write(&t)?;
    dir.write(&dropped_table(&data.dropped))?;
    dir.write(&line_error_table(&data.line_errors))?;

    println!(
        "{} trading days; proxy {}; volatility forecast {sigma_hat:.2}% ({vol_rule}); {:.0}% intervals",
        z.len(),
        spec.label(),
        ci_level * 100.0
    );
    print!("{}", render(&report_table(&coverage, &estimates)));
    super::finish("mincap", &out, dir.written().len());
    Ok(())
}

/// One row per coverage with long and short estimates side by side, in
/// percent.
fn report_table(coverage: &[f64], estimates: &[MincapEstimate]) -> Table {
    let mut t = Table::new(
        "",
        &["coverage", "long", "long_low", "long_high", "short", "short_low", "short_high"],
    );
    for &c in coverage {
        let pick = |p: Position| estimates.iter().find(|e| e.position == p && e.coverage == c);
        let mut row: Vec<Cell> = vec![percent_label(c).into()];
        for p in [Position::Long, Position::Short] {
            match pick(p) {
                Some(e) => row.extend([e.lambda.into(), e.ci_low.into(), e.ci_high.into()]),
                None => row.extend([Cell::Empty, Cell::Empty, Cell::Empty]),
            }
        }
        t.push(row);
    }
    t
}

fn percent_label(c: f64) -> String {
    let text = format!("{:.2}", c * 100.0);
    format!("{}%", text.trim_end_matches('0').trim_end_matches('.'))
}
