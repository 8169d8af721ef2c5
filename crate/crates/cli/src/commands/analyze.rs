//! Summary statistics (Panels A/B/C), autocorrelations, distribution data
//! and series dumps.

use absvol_core::powervar::{standardize, volatility_proxy, Base, PowerVariationSpec};
use absvol_core::returns::daily_return;
use absvol_core::stats::{acf, distribution_data, summary, AcfTransform, SummaryStats};
use chrono::NaiveDate;
use serde::Serialize;

use super::{dropped_table, ingest, input_plan, line_error_table, output_settings, InputSettings, OutputSettings};
use crate::config::{check_powers, parse_bases, Settings, DEFAULT_POWERS};
use crate::error::{CliError, CliResult};
use crate::output::{render, Cell, OutputDir, Table};

#[derive(Debug, Serialize)]
struct AnalyzeConfig {
    #[serde(flatten)]
    input: InputSettings,
    powers: Vec<f64>,
    bases: Vec<Base>,
    max_lag: usize,
    #[serde(flatten)]
    output: OutputSettings,
}

struct Series {
    panel: &'static str,
    label: String,
    spec: Option<PowerVariationSpec>,
    days: Vec<NaiveDate>,
    values: Vec<f64>,
}

const SUMMARY_COLUMNS: [&str; 13] = [
    "panel",
    "series",
    "base",
    "power",
    "n",
    "mean",
    "sd",
    "skewness",
    "excess_kurtosis",
    "skew_threshold",
    "kurt_threshold",
    "skew_significant",
    "kurt_significant",
];

pub fn run(s: &Settings) -> CliResult<()> {
    let mut powers: Vec<f64> = s.get_list("powers", &DEFAULT_POWERS)?;
    check_powers("powers", &powers)?;
    dedup_in_order(&mut powers);
    let bases = parse_bases(s)?;
    let max_lag: usize = s.get("max_lag", 20)?;
    if max_lag == 0 {
        return Err(CliError::usage("`max_lag` must be at least 1"));
    }
    let (out, format, output) = output_settings(s)?;
    let (ticks, calendar, strict, cal) = input_plan(s)?;

    let data = ingest(ticks, calendar, strict, cal)?;
    let intra = &data.intra;
    let m = intra.intervals();
    let daily = daily_return(intra);

    let mut series = vec![Series {
        panel: "A",
        label: "returns".into(),
        spec: None,
        days: daily.days.clone(),
        values: daily.values.clone(),
    }];
    let mut standardized = Vec::new();
    for &base in &bases {
        for &c in &powers {
            let spec = PowerVariationSpec::new(base, c, m);
            let vol = volatility_proxy(intra, &spec)?;
            let z = standardize(&daily, &vol)?.series;
            series.push(Series {
                panel: "B",
                label: format!("proxy_{}", spec.label()),
                spec: Some(spec),
                days: vol.days,
                values: vol.sigma,
            });
            standardized.push(Series {
                panel: "C",
                label: format!("z_{}", spec.label()),
                spec: Some(spec),
                days: z.days,
                values: z.z,
            });
        }
    }
    series.extend(standardized);

    let config = AnalyzeConfig {
        input: data.settings.clone(),
        powers,
        bases,
        max_lag,
        output,
    };
    let mut dir = OutputDir::create(&out, format, "analyze", &config)?;

    let mut summary_table = Table::new("summary", &SUMMARY_COLUMNS);
    for ser in &series {
        let stats = summary(&ser.values).map_err(|e| in_series(e, &ser.label))?;
        summary_table.push(summary_row(ser, &stats));

        let mut t = Table::new(format!("{}_stats", ser.label), &["stat", "value"]);
        for (name, value) in stat_pairs(&stats) {
            t.push(vec![name.into(), value]);
        }
        dir.write(&t)?;

        let a = acf(&ser.values, max_lag, AcfTransform::Identity).map_err(|e| in_series(e, &ser.label))?;
        let mut t = Table::new(format!("{}_acf", ser.label), &["lag", "rho", "band"]);
        for (lag, rho) in a.lags.iter().zip(&a.rho) {
            t.push(vec![(*lag).into(), (*rho).into(), a.band.into()]);
        }
        dir.write(&t)?;

        let dist = distribution_data(&ser.values).map_err(|e| in_series(e, &ser.label))?;
        let mut t = Table::new(format!("{}_hist", ser.label), &["bin_left", "bin_right", "count"]);
        for b in &dist.bins {
            t.push(vec![b.left.into(), b.right.into(), b.count.into()]);
        }
        dir.write(&t)?;
        let mut t = Table::new(format!("{}_qq", ser.label), &["theoretical", "empirical"]);
        for q in &dist.qq {
            t.push(vec![q.theoretical.into(), q.empirical.into()]);
        }
        dir.write(&t)?;

        let mut t = Table::new(format!("{}_series", ser.label), &["day", "value"]);
        for (d, v) in ser.days.iter().zip(&ser.values) {
            t.push(vec![d.to_string().into(), (*v).into()]);
        }
        dir.write(&t)?;
    }
    dir.write(&summary_table)?;

    let mut t = Table::new("intraday_returns", &["day", "j", "value"]);
    for (day, row) in intra.iter() {
        let day = day.to_string();
        for (j, r) in row.iter().enumerate() {
            t.push(vec![day.clone().into(), (j + 1).into(), (*r).into()]);
        }
    }
    dir.write(&t)?;
    dir.write(&dropped_table(&data.dropped))?;
    dir.write(&line_error_table(&data.line_errors))?;

    print_report(&summary_table, intra.len(), m, data.dropped.len());
    super::finish("analyze", &out, dir.written().len());
    Ok(())
}

fn in_series(err: absvol_core::Error, label: &str) -> CliError {
    let mut e = CliError::from(err);
    e.message = format!("series `{label}`: {}", e.message);
    e
}

fn dedup_in_order(values: &mut Vec<f64>) {
    let mut seen: Vec<f64> = Vec::new();
    values.retain(|v| {
        let fresh = !seen.contains(v);
        seen.push(*v);
        fresh
    });
}

fn summary_row(ser: &Series, st: &SummaryStats) -> Vec<Cell> {
    vec![
        ser.panel.into(),
        ser.label.clone().into(),
        ser.spec.map(|s| s.base.as_str()).into(),
        ser.spec.map(|s| s.power).into(),
        st.n.into(),
        st.mean.into(),
        st.sd.into(),
        st.skewness.into(),
        st.excess_kurtosis.into(),
        st.skew_threshold().into(),
        st.kurt_threshold().into(),
        st.skew_significant.into(),
        st.kurt_significant.into(),
    ]
}

fn stat_pairs(st: &SummaryStats) -> Vec<(&'static str, Cell)> {
    vec![
        ("n", st.n.into()),
        ("mean", st.mean.into()),
        ("sd", st.sd.into()),
        ("skewness", st.skewness.into()),
        ("excess_kurtosis", st.excess_kurtosis.into()),
        ("se_skew", st.se_skew.into()),
        ("se_kurt", st.se_kurt.into()),
        ("skew_significant", st.skew_significant.into()),
        ("kurt_significant", st.kurt_significant.into()),
    ]
}

fn print_report(summary: &Table, days: usize, m: usize, dropped: usize) {
    println!("{days} trading days, {m} intraday intervals, {dropped} days dropped");
    let titles = [
        ("A", "Panel A: daily returns (%)"),
        ("B", "Panel B: volatility proxies"),
        ("C", "Panel C: standardized returns"),
    ];
    for (panel, title) in titles {
        let mut t = Table::new(
            "",
            &["series", "n", "mean", "sd", "skewness", "kurtosis", "2se_skew", "2se_kurt"],
        );
        for row in summary.rows.iter().filter(|r| r[0] == Cell::from(panel)) {
            let mut cells = vec![row[1].clone()];
            cells.extend(row[4..11].iter().cloned());
            t.push(cells);
        }
        println!("\n{title}");
        print!("{}", render(&t));
    }
    println!("\nskewness/kurtosis beyond 2se are significant at 5%");
}
