//! Mean absolute relative error of normalized power variation against the
//! simulated integrated truth, over a grid of powers and sampling frequencies.

use absvol_core::simulate::{convergence_report, ConvergenceReport, SvConfig};
use serde::Serialize;

use super::simulate::sv_config;
use super::{output_settings, OutputSettings};
use crate::config::{check_powers, Settings};
use crate::error::{CliError, CliResult};
use crate::output::{render, Cell, OutputDir, Table};

pub const DEFAULT_M: [usize; 3] = [24, 107, 428];
pub const DEFAULT_POWERS: [f64; 2] = [1.0, 2.0];
const MIN_FINE_STEPS: usize = 10;

#[derive(Debug, Serialize)]
struct ConvergenceConfig {
    vol_model: String,
    sv: SvConfig,
    powers: Vec<f64>,
    m: Vec<usize>,
    #[serde(flatten)]
    output: OutputSettings,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Fine steps per interval of the largest `m` such that every `m` divides the
/// day's fine grid and the largest has at least `min_steps` steps.
pub fn fine_steps_for(m_set: &[usize], min_steps: usize) -> usize {
    let lcm = m_set.iter().fold(1, |acc, &m| acc / gcd(acc, m) * m);
    let m_max = *m_set.iter().max().expect("non-empty");
    let per_day = lcm * (min_steps * m_max).div_ceil(lcm);
    per_day / m_max
}

pub fn run(s: &Settings) -> CliResult<()> {
    let mut m_set: Vec<usize> = s.get_list("m", &DEFAULT_M)?;
    if m_set.contains(&0) {
        return Err(CliError::usage("`m` values must be positive"));
    }
    m_set.sort_unstable();
    m_set.dedup();
    let powers: Vec<f64> = s.get_list("powers", &DEFAULT_POWERS)?;
    check_powers("powers", &powers)?;
    let m_max = *m_set.last().expect("non-empty list");
    let fine = match s.get_opt::<usize>("fine_steps")? {
        Some(f) => f,
        None => fine_steps_for(&m_set, MIN_FINE_STEPS),
    };
    let (vol_model, sv) = sv_config(s, m_max, fine)?;
    let (out, format, output) = output_settings(s)?;

    let report = convergence_report(&sv, &powers, &m_set)?;

    let config = ConvergenceConfig {
        vol_model,
        sv,
        powers,
        m: m_set.clone(),
        output,
    };
    let mut dir = OutputDir::create(&out, format, "convergence", &config)?;
    let mut t = Table::new("convergence", &["p", "m", "mean_abs_rel_error"]);
    for r in &report.rows {
        t.push(vec![r.p.into(), r.m.into(), r.mean_abs_rel_error.into()]);
    }
    dir.write(&t)?;
    let mut t = Table::new("convergence_flags", &["p", "monotone_decreasing"]);
    for f in &report.flags {
        t.push(vec![f.p.into(), f.monotone_decreasing.into()]);
    }
    dir.write(&t)?;

    println!(
        "{} simulated days, {} fine steps/day; mean absolute relative error (%)",
        sv.days,
        sv.fine_steps_per_day()
    );
    print!("{}", render(&matrix(&report, &m_set)));
    super::finish("convergence", &out, dir.written().len());
    Ok(())
}

fn matrix(report: &ConvergenceReport, m_set: &[usize]) -> Table {
    let mut columns = vec!["p".to_string()];
    columns.extend(m_set.iter().map(|m| format!("m={m}")));
    columns.push("monotone".into());
    let mut t = Table {
        name: String::new(),
        columns,
        rows: Vec::new(),
    };
    for f in &report.flags {
        let mut row: Vec<Cell> = vec![f.p.into()];
        row.extend(m_set.iter().map(|&m| report.error(f.p, m).map(|e| e * 100.0).into()));
        row.push(f.monotone_decreasing.into());
        t.push(row);
    }
    t
}
