mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::{CliError, CliResult};

/// Realized power variation volatility, standardized-return diagnostics and
/// minimum capital requirements.
///
/// Every option may also be given in a `key = value` config file (keys are
/// the long option names); options on the command line take precedence.
/// Exit codes: 0 success, 2 usage, 3 I/O, 4 data quality. Errors are
/// reported as JSON on stderr.
#[derive(Debug, Parser)]
#[command(name = "absvol", version)]
struct Cli {
    /// Key-value config file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summary statistics (Panels A/B/C), autocorrelations, distribution
    /// data and series dumps for returns, proxies and standardized returns
    Analyze(AnalyzeArgs),
    /// Minimum capital requirements for long and short positions
    Mincap(MincapArgs),
    /// Simulate stochastic-volatility prices and export them as ticks
    Simulate(SimulateArgs),
    /// Error of normalized power variation against simulated truth
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Tick file (`timestamp,price,volume,contract`)
    #[arg(long, value_name = "FILE")]
    ticks: Option<String>,
    /// Excluded-dates file (`excluded_date`)
    #[arg(long, value_name = "FILE")]
    calendar: Option<String>,
    /// Intervals per day; sets the session close from the open [default: 107]
    #[arg(long)]
    m: Option<String>,
    /// Session open, HH:MM [default: 08:35]
    #[arg(long, value_name = "HH:MM")]
    session_open: Option<String>,
    /// Session close, HH:MM [default: 17:35]
    #[arg(long, value_name = "HH:MM")]
    session_close: Option<String>,
    /// Bar length in minutes [default: 5]
    #[arg(long, value_name = "MINUTES")]
    interval_minutes: Option<String>,
    /// Longest run of empty bars before a day is dropped [default: 12]
    #[arg(long, value_name = "BARS")]
    max_gap: Option<String>,
    /// Abort on the first malformed tick line instead of skipping it
    #[arg(long)]
    strict: bool,
}

impl InputArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_flag("ticks", self.ticks.as_ref());
        s.set_flag("calendar", self.calendar.as_ref());
        s.set_flag("m", self.m.as_ref());
        s.set_flag("session_open", self.session_open.as_ref());
        s.set_flag("session_close", self.session_close.as_ref());
        s.set_flag("interval_minutes", self.interval_minutes.as_ref());
        s.set_flag("max_gap", self.max_gap.as_ref());
        if self.strict {
            s.set_flag("strict", Some(&"true".to_string()));
        }
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output directory, created if missing [default: absvol-out]
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// csv or json [default: csv]
    #[arg(long)]
    format: Option<String>,
}

impl OutputArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_flag("out", self.out.as_ref());
        s.set_flag("format", self.format.as_ref());
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Number of simulated days [default: 1000]
    #[arg(long)]
    days: Option<String>,
    /// Master seed [default: 42]
    #[arg(long)]
    seed: Option<String>,
    /// constant:SIGMA, logou:KAPPA,THETA,XI or logou-cal:KAPPA,XI,TARGET
    /// [default: logou-cal:0.1,0.3,1.3]
    #[arg(long, value_name = "MODEL")]
    vol_model: Option<String>,
    /// Euler steps per intraday interval
    #[arg(long)]
    fine_steps: Option<String>,
    /// Drift in percent per day [default: 0]
    #[arg(long)]
    drift: Option<String>,
}

impl SimArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_flag("days", self.days.as_ref());
        s.set_flag("seed", self.seed.as_ref());
        s.set_flag("vol_model", self.vol_model.as_ref());
        s.set_flag("fine_steps", self.fine_steps.as_ref());
        s.set_flag("drift", self.drift.as_ref());
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Powers c, comma-separated [default: 0.5,0.75,1,1.25,1.5]
    #[arg(long)]
    powers: Option<String>,
    /// Bases (abs, sq), comma-separated [default: abs,sq]
    #[arg(long)]
    bases: Option<String>,
    /// Largest autocorrelation lag [default: 20]
    #[arg(long)]
    max_lag: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct MincapArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Coverage probabilities, comma-separated [default: 0.95,0.96,0.97,0.98,0.99]
    #[arg(long)]
    coverage: Option<String>,
    /// Proxy base, abs or sq [default: abs]
    #[arg(long)]
    base: Option<String>,
    /// Proxy power c [default: 1]
    #[arg(long)]
    power: Option<String>,
    /// last_day, full_mean or rolling_mean:K [default: last_day]
    #[arg(long, value_name = "RULE")]
    vol_forecast: Option<String>,
    /// Confidence level of the intervals [default: 0.95]
    #[arg(long)]
    ci_level: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Intervals per day [default: 107]
    #[arg(long)]
    m: Option<String>,
    /// Powers whose integrated truth is recorded [default: 0.5,0.75,1,1.25,1.5]
    #[arg(long)]
    powers: Option<String>,
    /// Session open of the exported ticks, HH:MM [default: 08:35]
    #[arg(long, value_name = "HH:MM")]
    session_open: Option<String>,
    /// Bar length of the exported ticks in minutes [default: 5]
    #[arg(long, value_name = "MINUTES")]
    interval_minutes: Option<String>,
    /// Price at the first grid point [default: 5000]
    #[arg(long)]
    start_price: Option<String>,
    /// Contract token written to every tick [default: SIM]
    #[arg(long)]
    contract: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Intervals per day to compare, comma-separated [default: 24,107,428]
    #[arg(long)]
    m: Option<String>,
    /// Powers p, comma-separated [default: 1,2]
    #[arg(long)]
    powers: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut s = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    match &cli.command {
        Command::Analyze(a) => {
            a.input.apply(&mut s);
            s.set_flag("powers", a.powers.as_ref());
            s.set_flag("bases", a.bases.as_ref());
            s.set_flag("max_lag", a.max_lag.as_ref());
            a.output.apply(&mut s);
            commands::analyze::run(&s)
        }
        Command::Mincap(a) => {
            a.input.apply(&mut s);
            s.set_flag("coverage", a.coverage.as_ref());
            s.set_flag("base", a.base.as_ref());
            s.set_flag("power", a.power.as_ref());
            s.set_flag("vol_forecast", a.vol_forecast.as_ref());
            s.set_flag("ci_level", a.ci_level.as_ref());
            a.output.apply(&mut s);
            commands::mincap::run(&s)
        }
        Command::Simulate(a) => {
            a.sim.apply(&mut s);
            s.set_flag("m", a.m.as_ref());
            s.set_flag("powers", a.powers.as_ref());
            s.set_flag("session_open", a.session_open.as_ref());
            s.set_flag("interval_minutes", a.interval_minutes.as_ref());
            s.set_flag("start_price", a.start_price.as_ref());
            s.set_flag("contract", a.contract.as_ref());
            a.output.apply(&mut s);
            commands::simulate::run(&s)
        }
        Command::Convergence(a) => {
            a.sim.apply(&mut s);
            s.set_flag("m", a.m.as_ref());
            s.set_flag("powers", a.powers.as_ref());
            a.output.apply(&mut s);
            commands::convergence::run(&s)
        }
    }
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.report());
    ExitCode::from(err.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ClapErrorKind::DisplayHelp
            | ClapErrorKind::DisplayVersion
            | ClapErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => e.exit(),
            _ => {
                let text = e.render().to_string();
                let first = text.lines().next().unwrap_or("invalid arguments");
                return fail(&CliError::usage(first.trim_start_matches("error: ")));
            }
        },
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
