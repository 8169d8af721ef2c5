//! Stochastic-volatility price simulation with known integrated power
//! volatility.
//!
//! Log prices (in percent) follow `dp = drift·dt + σ_t dW` on a fine Euler
//! grid of `intervals_m · fine_steps_per_interval` steps per day, with time
//! measured in days. Spot volatility is either constant or a log
//! Ornstein–Uhlenbeck process `d ln σ = κ(ln θ − ln σ)dt + ξ dB` driven by
//! shocks independent of the price shocks. The integrated truth for power `p`
//! is the left-point sum `Σ σ_i^p dt` over the day's fine steps.
//!
//! Every day draws from its own ChaCha stream derived from the master seed,
//! so results do not depend on how days are scheduled across threads.

use chrono::{Datelike, Days, NaiveDate, NaiveTime, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{SessionCalendar, TickRecord};
use crate::powervar::normalized_day;
use crate::returns::IntradayReturns;

const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SpotVolModel {
    Constant { sigma: f64 },
    LogOu { kappa: f64, theta: f64, xi: f64 },
}

impl SpotVolModel {
    /// Log-OU with `θ` chosen so that the stationary `√E[σ²]` (the
    /// unconditional daily return standard deviation) equals `target_sd`.
    pub fn log_ou_calibrated(kappa: f64, xi: f64, target_sd: f64) -> Self {
        let var_log_vol = xi * xi / (2.0 * kappa);
        SpotVolModel::LogOu {
            kappa,
            theta: target_sd * (-var_log_vol).exp(),
            xi,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SpotVolModel::Constant { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(Error::invalid(format!("constant volatility must be positive, got {sigma}")))
            }
            SpotVolModel::LogOu { kappa, theta, xi }
                if !(kappa > 0.0 && theta > 0.0 && xi >= 0.0 && kappa.is_finite() && theta.is_finite() && xi.is_finite()) =>
            {
                Err(Error::invalid(format!(
                    "log-OU needs kappa > 0, theta > 0, xi >= 0 (got {kappa}, {theta}, {xi})"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvConfig {
    pub days: usize,
    pub intervals_m: usize,
    pub fine_steps_per_interval: usize,
    pub spot_vol_model: SpotVolModel,
    /// Percent per day.
    pub drift: f64,
    pub seed: u64,
}

impl SvConfig {
    /// Log-OU setup used for the acceptance runs: κ = 0.1/day, ξ = 0.3,
    /// unconditional daily return sd 1.3%, 107 intervals of 10 fine steps.
    pub fn reference(days: usize, seed: u64) -> Self {
        Self {
            days,
            intervals_m: 107,
            fine_steps_per_interval: 10,
            spot_vol_model: SpotVolModel::log_ou_calibrated(0.1, 0.3, 1.3),
            drift: 0.0,
            seed,
        }
    }

    pub fn fine_steps_per_day(&self) -> usize {
        self.intervals_m * self.fine_steps_per_interval
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 || self.intervals_m == 0 {
            return Err(Error::invalid("days and intervals_m must be positive"));
        }
        if self.fine_steps_per_interval < 10 {
            return Err(Error::invalid(format!(
                "fine_steps_per_interval must be at least 10, got {}",
                self.fine_steps_per_interval
            )));
        }
        if !self.drift.is_finite() {
            return Err(Error::invalid("drift must be finite"));
        }
        self.spot_vol_model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratedPower {
    pub p: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub returns: IntradayReturns,
    pub true_integrated: Vec<IntegratedPower>,
    /// Per day, spot volatility at each fine step.
    pub spot_vol_path: Vec<Vec<f64>>,
}

impl SimOutput {
    pub fn truth(&self, p: f64) -> Option<&[f64]> {
        self.true_integrated
            .iter()
            .find(|t| t.p == p)
            .map(|t| t.values.as_slice())
    }
}

/// Consecutive weekdays starting on the first Monday of 1999.
pub fn synthetic_days(count: usize) -> Vec<NaiveDate> {
    let mut day = NaiveDate::from_ymd_opt(1999, 1, 4).unwrap();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day + Days::new(1);
    }
    out
}

struct Engine {
    config: SvConfig,
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
    /// Log spot volatility at the start of each day.
    day_start: Vec<f64>,
}

impl Engine {
    fn new(config: SvConfig) -> Result<Self> {
        config.validate()?;
        let steps = config.fine_steps_per_day();
        let dt = 1.0 / steps as f64;
        let mut engine = Self {
            config,
            steps,
            dt,
            sqrt_dt: dt.sqrt(),
            day_start: Vec::new(),
        };
        engine.day_start = engine.day_start_states();
        Ok(engine)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        rng
    }

    fn vol_rng(&self, day: usize) -> ChaCha8Rng {
        self.rng(2 * day as u64)
    }

    fn price_rng(&self, day: usize) -> ChaCha8Rng {
        self.rng(2 * day as u64 + 1)
    }

    fn step_log_vol(&self, log_vol: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self.config.spot_vol_model {
            SpotVolModel::Constant { .. } => log_vol,
            SpotVolModel::LogOu { kappa, theta, xi } => {
                let shock: f64 = StandardNormal.sample(rng);
                log_vol + kappa * (theta.ln() - log_vol) * self.dt + xi * self.sqrt_dt * shock
            }
        }
    }

    /// Sequential pass over the volatility shocks to find each day's
    /// starting state; the log-OU process starts from its stationary law.
    fn day_start_states(&self) -> Vec<f64> {
        match self.config.spot_vol_model {
            SpotVolModel::Constant { sigma } => vec![sigma.ln(); self.config.days],
            SpotVolModel::LogOu { kappa, theta, xi } => {
                let mut init = self.rng(INIT_STREAM);
                let shock: f64 = StandardNormal.sample(&mut init);
                let mut log_vol = theta.ln() + xi / (2.0 * kappa).sqrt() * shock;
                let mut starts = Vec::with_capacity(self.config.days);
                for day in 0..self.config.days {
                    starts.push(log_vol);
                    let mut rng = self.vol_rng(day);
                    for _ in 0..self.steps {
                        log_vol = self.step_log_vol(log_vol, &mut rng);
                    }
                }
                starts
            }
        }
    }

    /// Walks one day's fine grid, calling `visit(σ_i, Δp_i)` for each step.
    fn walk_day(&self, day: usize, mut visit: impl FnMut(f64, f64)) {
        let mut vol_rng = self.vol_rng(day);
        let mut price_rng = self.price_rng(day);
        let constant = match self.config.spot_vol_model {
            SpotVolModel::Constant { sigma } => Some(sigma),
            SpotVolModel::LogOu { .. } => None,
        };
        let mut log_vol = self.day_start[day];
        let drift_step = self.config.drift * self.dt;
        for _ in 0..self.steps {
            let sigma = constant.unwrap_or_else(|| log_vol.exp());
            let eps: f64 = StandardNormal.sample(&mut price_rng);
            visit(sigma, drift_step + sigma * self.sqrt_dt * eps);
            log_vol = self.step_log_vol(log_vol, &mut vol_rng);
        }
    }
}

struct DaySim {
    returns: Vec<f64>,
    truth: Vec<f64>,
    path: Vec<f64>,
}

pub fn simulate_sv(config: &SvConfig, powers: &[f64]) -> Result<SimOutput> {
    if let Some(p) = powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::invalid(format!("integrated power must be positive, got {p}")));
    }
    let engine = Engine::new(*config)?;
    let fine = config.fine_steps_per_interval;
    let per_day: Vec<DaySim> = (0..config.days)
        .into_par_iter()
        .map(|day| {
            let mut returns = vec![0.0; config.intervals_m];
            let mut truth = vec![0.0; powers.len()];
            let mut path = Vec::with_capacity(engine.steps);
            let mut i = 0usize;
            engine.walk_day(day, |sigma, inc| {
                returns[i / fine] += inc;
                for (t, p) in truth.iter_mut().zip(powers) {
                    *t += sigma.powf(*p) * engine.dt;
                }
                path.push(sigma);
                i += 1;
            });
            DaySim { returns, truth, path }
        })
        .collect();

    let mut returns = Vec::with_capacity(config.days);
    let mut spot_vol_path = Vec::with_capacity(config.days);
    let mut true_integrated: Vec<IntegratedPower> = powers
        .iter()
        .map(|&p| IntegratedPower {
            p,
            values: Vec::with_capacity(config.days),
        })
        .collect();
    for day in per_day {
        for (slot, v) in true_integrated.iter_mut().zip(day.truth) {
            slot.values.push(v);
        }
        returns.push(day.returns);
        spot_vol_path.push(day.path);
    }
    Ok(SimOutput {
        returns: IntradayReturns::new(synthetic_days(config.days), returns)?,
        true_integrated,
        spot_vol_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub p: f64,
    pub m: usize,
    pub mean_abs_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneFlag {
    pub p: f64,
    pub monotone_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub flags: Vec<MonotoneFlag>,
}

impl ConvergenceReport {
    pub fn error(&self, p: f64, m: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.p == p && r.m == m)
            .map(|r| r.mean_abs_rel_error)
    }

    pub fn is_monotone(&self, p: f64) -> Option<bool> {
        self.flags.iter().find(|f| f.p == p).map(|f| f.monotone_decreasing)
    }
}

/// Mean absolute relative error of the normalized estimator against the
/// integrated truth, for each power in `p_set` and sampling count in
/// `m_set`. Each `m` must divide the fine grid.
pub fn convergence_report(config: &SvConfig, p_set: &[f64], m_set: &[usize]) -> Result<ConvergenceReport> {
    if p_set.is_empty() || m_set.is_empty() {
        return Err(Error::invalid("power and interval sets must be non-empty"));
    }
    if let Some(p) = p_set.iter().find(|p| !(0.5..3.0).contains(*p)) {
        return Err(Error::invalid(format!("normalized power must be in [0.5, 3), got {p}")));
    }
    let engine = Engine::new(*config)?;
    let steps = engine.steps;
    let mut ms = m_set.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if let Some(m) = ms.iter().find(|&&m| m == 0 || steps % m != 0) {
        return Err(Error::invalid(format!(
            "m = {m} does not divide the {steps}-step fine grid"
        )));
    }

    // Per day: errors laid out p-major, then m.
    let per_day: Vec<Vec<f64>> = (0..config.days)
        .into_par_iter()
        .map(|day| {
            let mut sigma = Vec::with_capacity(steps);
            let mut inc = Vec::with_capacity(steps);
            engine.walk_day(day, |s, d| {
                sigma.push(s);
                inc.push(d);
            });
            let coarse: Vec<Vec<f64>> = ms
                .iter()
                .map(|&m| inc.chunks(steps / m).map(|c| c.iter().sum()).collect())
                .collect();
            let mut errors = Vec::with_capacity(p_set.len() * ms.len());
            for &p in p_set {
                let truth: f64 = sigma.iter().map(|s| s.powf(p) * engine.dt).sum();
                for row in &coarse {
                    errors.push((normalized_day(row, p) - truth).abs() / truth);
                }
            }
            errors
        })
        .collect();

    let mut rows = Vec::with_capacity(p_set.len() * ms.len());
    for (pi, &p) in p_set.iter().enumerate() {
        for (mi, &m) in ms.iter().enumerate() {
            let idx = pi * ms.len() + mi;
            let total: f64 = per_day.iter().map(|e| e[idx]).sum();
            rows.push(ConvergenceRow {
                p,
                m,
                mean_abs_rel_error: total / config.days as f64,
            });
        }
    }
    let flags = p_set
        .iter()
        .map(|&p| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.p == p).map(|r| r.mean_abs_rel_error).collect();
            MonotoneFlag {
                p,
                monotone_decreasing: errs.windows(2).all(|w| w[1] < w[0]),
            }
        })
        .collect();
    Ok(ConvergenceReport { rows, flags })
}

/// One synthetic trade per grid point of `cal`, carrying the previous close
/// into the next day's first grid point.
pub fn to_ticks(
    returns: &IntradayReturns,
    cal: &SessionCalendar,
    start_price: f64,
    contract: &str,
) -> Result<Vec<TickRecord>> {
    if cal.intervals() != returns.intervals() {
        return Err(Error::invalid(format!(
            "calendar has {} intervals per day, simulation has {}",
            cal.intervals(),
            returns.intervals()
        )));
    }
    if !(start_price.is_finite() && start_price > 0.0) {
        return Err(Error::invalid("start price must be positive"));
    }
    let times: Vec<NaiveTime> = cal.grid_times().collect();
    let mut log_price = start_price.ln();
    let mut ticks = Vec::with_capacity(returns.len() * times.len());
    for (day, row) in returns.iter() {
        for (k, t) in times.iter().enumerate() {
            if k > 0 {
                log_price += row[k - 1] / 100.0;
            }
            ticks.push(TickRecord {
                timestamp: day.and_time(*t),
                price: log_price.exp(),
                volume: 1,
                contract: contract.to_string(),
            });
        }
    }
    Ok(ticks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_grid;
    use crate::returns::intraday_log_returns;

    fn constant(days: usize, sigma: f64, seed: u64) -> SvConfig {
        SvConfig {
            days,
            intervals_m: 20,
            fine_steps_per_interval: 10,
            spot_vol_model: SpotVolModel::Constant { sigma },
            drift: 0.0,
            seed,
        }
    }

    #[test]
    fn constant_truth_is_sigma_power() {
        let out = simulate_sv(&constant(5, 1.3, 1), &[1.0, 2.0]).unwrap();
        for v in out.truth(2.0).unwrap() {
            assert!((v - 1.69).abs() < 1e-12);
        }
        for v in out.truth(1.0).unwrap() {
            assert!((v - 1.3).abs() < 1e-12);
        }
        assert_eq!(out.returns.len(), 5);
        assert_eq!(out.returns.intervals(), 20);
        assert_eq!(out.spot_vol_path[0].len(), 200);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SvConfig::reference(20, 42);
        let a = simulate_sv(&cfg, &[1.0]).unwrap();
        let b = simulate_sv(&cfg, &[1.0]).unwrap();
        assert_eq!(a.returns, b.returns);
        assert_eq!(a.true_integrated, b.true_integrated);
        let c = simulate_sv(&SvConfig { seed: 43, ..cfg }, &[1.0]).unwrap();
        assert_ne!(a.returns, c.returns);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = SvConfig::reference(12, 5);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_sv(&cfg, &[2.0]).unwrap());
        let b = four.install(|| simulate_sv(&cfg, &[2.0]).unwrap());
        assert_eq!(a.returns, b.returns);
        let ca = one.install(|| convergence_report(&cfg, &[1.0], &[107]).unwrap());
        let cb = four.install(|| convergence_report(&cfg, &[1.0], &[107]).unwrap());
        assert_eq!(ca, cb);
    }

    #[test]
    fn log_ou_without_vol_of_vol_is_constant() {
        let mut cfg = constant(4, 1.1, 9);
        let base = simulate_sv(&cfg, &[2.0]).unwrap();
        cfg.spot_vol_model = SpotVolModel::LogOu { kappa: 0.5, theta: 1.1, xi: 0.0 };
        let ou = simulate_sv(&cfg, &[2.0]).unwrap();
        for (a, b) in base.returns.returns().iter().flatten().zip(ou.returns.returns().iter().flatten()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        for (a, b) in base.truth(2.0).unwrap().iter().zip(ou.truth(2.0).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = constant(3, 1.0, 1);
        cfg.fine_steps_per_interval = 9;
        assert!(simulate_sv(&cfg, &[2.0]).is_err());
        let cfg = constant(3, -1.0, 1);
        assert!(simulate_sv(&cfg, &[2.0]).is_err());
        let mut cfg = constant(3, 1.0, 1);
        cfg.spot_vol_model = SpotVolModel::LogOu { kappa: 0.0, theta: 1.0, xi: 0.3 };
        assert!(simulate_sv(&cfg, &[2.0]).is_err());
        assert!(simulate_sv(&constant(3, 1.0, 1), &[0.0]).is_err());
    }

    #[test]
    fn calibration_targets_return_sd() {
        let SpotVolModel::LogOu { theta, .. } = SpotVolModel::log_ou_calibrated(0.1, 0.3, 1.3) else {
            unreachable!()
        };
        // θ·exp(ξ²/2κ) = 1.3
        assert!((theta * (0.45f64).exp() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn incompatible_grid_rejected() {
        let cfg = constant(2, 1.0, 1);
        assert!(convergence_report(&cfg, &[2.0], &[7]).is_err());
        assert!(convergence_report(&cfg, &[0.4], &[20]).is_err());
        assert!(convergence_report(&cfg, &[2.0], &[]).is_err());
    }

    #[test]
    fn finest_sampling_matches_fine_grid_sum() {
        let cfg = constant(3, 1.0, 4);
        let steps = cfg.fine_steps_per_day();
        let report = convergence_report(&cfg, &[2.0], &[steps]).unwrap();
        // Recompute: at m = fine grid the estimator is the sum of squared
        // fine increments and the truth is σ² = 1.
        let engine = Engine::new(cfg).unwrap();
        let mut total = 0.0;
        for day in 0..cfg.days {
            let mut rv = 0.0;
            engine.walk_day(day, |_, inc| rv += inc * inc);
            total += (rv - 1.0).abs();
        }
        let direct = total / cfg.days as f64;
        assert!((report.error(2.0, steps).unwrap() - direct).abs() < 1e-6 * direct);
    }

    #[test]
    fn constant_vol_error_shrinks_with_m() {
        let mut cfg = constant(2_000, 1.0, 12);
        cfg.intervals_m = 428;
        cfg.fine_steps_per_interval = 10;
        let report = convergence_report(&cfg, &[2.0], &[107, 428]).unwrap();
        let e107 = report.error(2.0, 107).unwrap();
        let e428 = report.error(2.0, 428).unwrap();
        assert!(e428 < e107);
        // E|RV/σ² − 1| ≈ √(2/m)·√(2/π)
        let approx = (2.0f64 / 107.0).sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        assert!((e107 - approx).abs() < 0.1 * approx, "{e107} vs {approx}");
        assert_eq!(report.is_monotone(2.0), Some(true));
    }

    #[test]
    fn exported_ticks_rebuild_the_returns() {
        let cfg = SvConfig { intervals_m: 107, ..constant(3, 1.2, 3) };
        let out = simulate_sv(&cfg, &[2.0]).unwrap();
        let cal = SessionCalendar::default();
        let ticks = to_ticks(&out.returns, &cal, 6000.0, "SIM").unwrap();
        assert_eq!(ticks.len(), 3 * 108);
        let grid = build_grid(&ticks, &cal).unwrap().grid;
        let rebuilt = intraday_log_returns(&grid).unwrap();
        for (a, b) in rebuilt.returns().iter().flatten().zip(out.returns.returns().iter().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
        let short = SessionCalendar::for_intervals(cal.session_open(), 5, 20).unwrap();
        assert!(to_ticks(&out.returns, &short, 6000.0, "SIM").is_err());
    }
}
