//! Realized power variation volatility estimation from high-frequency
//! prices, standardized-return diagnostics, and long/short minimum capital
//! requirements.
//!
//! The pipeline runs tick file → [`ingest`] grid → [`returns`] → volatility
//! proxies and standardized returns ([`powervar`]) → diagnostics
//! ([`stats`]) and capital requirements ([`mincap`]). [`simulate`] produces
//! stochastic-volatility data with known integrated volatility for testing
//! the estimators.

pub mod error;
pub mod ingest;
pub mod mincap;
pub mod powervar;
pub mod returns;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use ingest::{
    build_grid, parse_calendar, parse_ticks, roll_contracts, write_ticks, DropReason, DroppedDay,
    GridBuild, IntradayGrid, ParseMode, ParsedTicks, SessionCalendar, TickRecord,
};
pub use mincap::{
    mincap, mincap_ci, mincap_table, vol_forecast, MincapEstimate, MincapRequest, Position,
    VolForecastRule,
};
pub use powervar::{
    abs_moment, normalized_rpv, realized_power_variation, standardize, volatility_proxy, Base,
    NormalAbsMoment, PowerVariationSpec, StandardizedReturns, VolatilitySeries,
};
pub use returns::{daily_return, intraday_log_returns, DailyReturns, IntradayReturns};
pub use simulate::{convergence_report, simulate_sv, ConvergenceReport, SimOutput, SpotVolModel, SvConfig};
pub use stats::{acf, distribution_data, empirical_quantile, summary, AcfResult, AcfTransform, SummaryStats};
