//! Minimum capital requirements for long and short positions.
//!
//! With `s = σ̂/100` (the percent volatility forecast as a decimal) and `z_q`
//! a quantile of the standardized returns, the capital fraction in percent is
//!
//! * long:  `λ = (1 − exp(s·z_q))·100`, `z_q` the lower `1 − coverage` quantile
//! * short: `λ = (exp(s·z_q) − 1)·100`, `z_q` the upper `coverage` quantile
//!
//! Confidence intervals come from the exact resampling distribution of the
//! quantile estimator over the sample order statistics, mapped through the
//! same formula.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::powervar::{PowerVariationSpec, VolatilitySeries};
use crate::stats::{empirical_quantile, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Long,
    Short,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Position::Long => "long",
            Position::Short => "short",
        }
    }

    /// Probability level of the standardized-return quantile on the loss side.
    pub fn quantile_level(self, coverage: f64) -> f64 {
        match self {
            Position::Long => 1.0 - coverage,
            Position::Short => coverage,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolForecastRule {
    #[default]
    LastDay,
    RollingMean(usize),
    FullMean,
}

impl fmt::Display for VolForecastRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolForecastRule::LastDay => f.write_str("last_day"),
            VolForecastRule::RollingMean(k) => write!(f, "rolling_mean:{k}"),
            VolForecastRule::FullMean => f.write_str("full_mean"),
        }
    }
}

impl Serialize for VolForecastRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for VolForecastRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "last_day" | "last" => Ok(VolForecastRule::LastDay),
            "full_mean" | "mean" => Ok(VolForecastRule::FullMean),
            _ => {
                let k = s
                    .strip_prefix("rolling_mean:")
                    .or_else(|| s.strip_prefix("rolling:"))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown forecast rule `{s}`")))?;
                if k == 0 {
                    return Err(Error::invalid("rolling window must be at least 1"));
                }
                Ok(VolForecastRule::RollingMean(k))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MincapRequest {
    pub coverage: f64,
    pub position: Position,
    pub vol_forecast_rule: VolForecastRule,
    pub proxy_spec: PowerVariationSpec,
    pub ci_level: f64,
}

impl MincapRequest {
    pub fn new(coverage: f64, position: Position, proxy_spec: PowerVariationSpec) -> Self {
        Self {
            coverage,
            position,
            vol_forecast_rule: VolForecastRule::LastDay,
            proxy_spec,
            ci_level: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coverage > 0.5 && self.coverage < 1.0) {
            return Err(Error::invalid(format!(
                "coverage must be in (0.5, 1), got {}",
                self.coverage
            )));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::invalid(format!(
                "ci level must be in (0, 1), got {}",
                self.ci_level
            )));
        }
        if let VolForecastRule::RollingMean(0) = self.vol_forecast_rule {
            return Err(Error::invalid("rolling window must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MincapEstimate {
    /// Percent of total investment.
    pub lambda: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub coverage: f64,
    pub position: Position,
    pub z_quantile_used: f64,
    pub sigma_forecast_used: f64,
}

pub fn vol_forecast(vol: &VolatilitySeries, rule: VolForecastRule) -> Result<f64> {
    let sigma = &vol.sigma;
    if sigma.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    match rule {
        VolForecastRule::LastDay => Ok(sigma[sigma.len() - 1]),
        VolForecastRule::FullMean => Ok(mean(sigma)),
        VolForecastRule::RollingMean(0) => Err(Error::invalid("rolling window must be at least 1")),
        VolForecastRule::RollingMean(k) if k > sigma.len() => Err(Error::InsufficientData {
            needed: k,
            got: sigma.len(),
        }),
        VolForecastRule::RollingMean(k) => Ok(mean(&sigma[sigma.len() - k..])),
    }
}

/// Maps a standardized-return quantile to a capital fraction in percent.
pub fn capital_fraction(position: Position, sigma_hat: f64, z_q: f64) -> f64 {
    let x = sigma_hat / 100.0 * z_q;
    match position {
        Position::Long => -x.exp_m1() * 100.0,
        Position::Short => x.exp_m1() * 100.0,
    }
}

fn check_inputs(z: &[f64], sigma_hat: f64, req: &MincapRequest) -> Result<()> {
    req.validate()?;
    if z.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(sigma_hat.is_finite() && sigma_hat > 0.0) {
        return Err(Error::invalid(format!(
            "volatility forecast must be positive, got {sigma_hat}"
        )));
    }
    Ok(())
}

/// Point estimate and confidence interval.
pub fn mincap(z: &[f64], sigma_hat: f64, req: &MincapRequest) -> Result<MincapEstimate> {
    check_inputs(z, sigma_hat, req)?;
    let level = req.position.quantile_level(req.coverage);
    let z_q = empirical_quantile(z, level)?;
    let lambda = capital_fraction(req.position, sigma_hat, z_q);
    let (ci_low, ci_high) = mincap_ci(z, sigma_hat, req)?;
    Ok(MincapEstimate {
        lambda,
        ci_low: ci_low.min(lambda),
        ci_high: ci_high.max(lambda),
        coverage: req.coverage,
        position: req.position,
        z_quantile_used: z_q,
        sigma_forecast_used: sigma_hat,
    })
}

/// Probability that the resampled interpolated quantile is at or below the
/// `j`-th order statistic, for `j = 1..=n` (index 0 unused).
fn resample_cdf_by_rank(n: usize, level: f64) -> Vec<f64> {
    let h = level * (n - 1) as f64 + 1.0;
    let k = h.floor() as u64;
    let frac = h - k as f64;
    let mut cdf = vec![0.0; n + 1];
    for (j, slot) in cdf.iter_mut().enumerate().skip(1) {
        let p = j as f64 / n as f64;
        let at_least = |c: u64| -> f64 {
            if c == 0 {
                1.0
            } else if c > n as u64 {
                0.0
            } else if j == n {
                1.0
            } else {
                Binomial::new(p, n as u64).expect("valid binomial").sf(c - 1)
            }
        };
        *slot = (1.0 - frac) * at_least(k) + frac * at_least(k + 1);
    }
    cdf
}

fn tails_resolvable(cdf: &[f64], n: usize, alpha: f64) -> bool {
    n >= 2 && cdf[1] < alpha / 2.0 && cdf[n - 1] > 1.0 - alpha / 2.0
}

/// Masses below this are dropped from the resampling distribution.
const NEGLIGIBLE: f64 = 1e-18;

/// Exact resampling distribution of the interpolated quantile
/// `(1 − f)·X*(k) + f·X*(k+1)` of a size-`n` resample drawn with replacement
/// from `sorted`, as `(value, mass)` pairs sorted by value.
///
/// For ranks `a < b` the pair `X*(k) = x_a, X*(k+1) = x_b` needs exactly `k`
/// draws at or below `x_a` (one of them at `x_a`), none strictly between and
/// at least one at `x_b`, which factors into a term in `a` and a term in `b`.
/// The tied case `a = b` takes the remainder of `P(X*(k) = x_a)`.
fn resample_distribution(sorted: &[f64], level: f64) -> Vec<(f64, f64)> {
    let n = sorted.len();
    let nf = n as f64;
    let h = level * (n - 1) as f64 + 1.0;
    let k = (h.floor() as usize).min(n);
    let frac = if k == n { 0.0 } else { h - k as f64 };
    let rest = (n - k) as f64;

    let at_least_k = |j: usize| -> f64 {
        if j == n {
            1.0
        } else if j == 0 {
            0.0
        } else {
            Binomial::new(j as f64 / nf, n as u64).expect("valid binomial").sf(k as u64 - 1)
        }
    };
    // P(X*(k) = x_a), 1-based a.
    let point: Vec<f64> = (0..=n)
        .map(|a| if a == 0 { 0.0 } else { (at_least_k(a) - at_least_k(a - 1)).max(0.0) })
        .collect();

    let mut out = Vec::new();
    if frac == 0.0 {
        for a in 1..=n {
            if point[a] > NEGLIGIBLE {
                out.push((sorted[a - 1], point[a]));
            }
        }
    } else {
        let ln_choose = ln_binomial(n as u64, k as u64);
        let kf = k as f64;
        // ln C(n,k)·[(a/n)^k − ((a−1)/n)^k]
        let ln_lower = |a: usize| -> f64 {
            let af = a as f64;
            let head = ln_choose + kf * (af / nf).ln();
            if a == 1 {
                head
            } else {
                head + (-(kf * ((af - 1.0) / af).ln()).exp_m1()).ln()
            }
        };
        // ln [((n−b+1)/n)^(n−k) − ((n−b)/n)^(n−k)], decreasing in b
        let ln_upper = |b: usize| -> f64 {
            let top = (n - b + 1) as f64;
            let head = rest * (top / nf).ln();
            if b == n {
                head
            } else {
                head + (-(rest * ((top - 1.0) / top).ln()).exp_m1()).ln()
            }
        };
        for a in 1..=n {
            let la = ln_lower(a);
            let mut split = 0.0;
            for b in a + 1..=n {
                let mass = (la + ln_upper(b)).exp();
                if mass <= NEGLIGIBLE {
                    break;
                }
                split += mass;
                out.push(((1.0 - frac) * sorted[a - 1] + frac * sorted[b - 1], mass));
            }
            let tied = point[a] - split;
            if tied > NEGLIGIBLE {
                out.push((sorted[a - 1], tied));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Smallest support value whose cumulative mass reaches `target`.
fn distribution_quantile(dist: &[(f64, f64)], target: f64) -> f64 {
    let mut cum = 0.0;
    for &(value, mass) in dist {
        cum += mass;
        if cum >= target {
            return value;
        }
    }
    dist.last().expect("non-empty distribution").0
}

/// Smallest sample size at which both interval ends fall strictly inside the
/// sample.
pub fn min_sample_for_ci(level: f64, ci_level: f64) -> usize {
    let alpha = 1.0 - ci_level;
    let ok = |n: usize| {
        let h = level * (n - 1) as f64 + 1.0;
        let k = h.floor() as u64;
        let frac = h - k as f64;
        let at = |j: usize, c: u64| {
            if c == 0 {
                1.0
            } else if c > n as u64 {
                0.0
            } else {
                Binomial::new(j as f64 / n as f64, n as u64).unwrap().sf(c - 1)
            }
        };
        let f = |j: usize| (1.0 - frac) * at(j, k) + frac * at(j, k + 1);
        f(1) < alpha / 2.0 && f(n - 1) > 1.0 - alpha / 2.0
    };
    (2..10_000_000).find(|&n| ok(n)).unwrap_or(usize::MAX)
}

/// Distribution-free interval for the standardized-return quantile.
///
/// The interval ends are the `α/2` and `1 − α/2` quantiles of the exact
/// resampling distribution of the interpolated quantile estimator, so they
/// coincide with a percentile bootstrap in the limit of infinitely many
/// resamples. The sample must be large enough that the probability of the
/// estimator falling at or below the smallest (at or above the largest)
/// order statistic is under `α/2`.
pub fn quantile_ci(z: &[f64], level: f64, ci_level: f64) -> Result<(f64, f64)> {
    let n = z.len();
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let alpha = 1.0 - ci_level;
    let cdf = if n >= 2 { resample_cdf_by_rank(n, level) } else { Vec::new() };
    if !tails_resolvable(&cdf, n, alpha) {
        return Err(Error::InsufficientData {
            needed: min_sample_for_ci(level, ci_level),
            got: n,
        });
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dist = resample_distribution(&sorted, level);
    let low = distribution_quantile(&dist, alpha / 2.0);
    let high = distribution_quantile(&dist, 1.0 - alpha / 2.0);
    Ok((low, high))
}

/// Capital-fraction interval, ordered after mapping.
pub fn mincap_ci(z: &[f64], sigma_hat: f64, req: &MincapRequest) -> Result<(f64, f64)> {
    check_inputs(z, sigma_hat, req)?;
    let level = req.position.quantile_level(req.coverage);
    let (z_lo, z_hi) = quantile_ci(z, level, req.ci_level)?;
    let a = capital_fraction(req.position, sigma_hat, z_lo);
    let b = capital_fraction(req.position, sigma_hat, z_hi);
    Ok((a.min(b), a.max(b)))
}

/// Monte Carlo percentile bootstrap of the interpolated quantile; a
/// cross-check for [`quantile_ci`].
pub fn bootstrap_quantile_ci(
    z: &[f64],
    level: f64,
    ci_level: f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if z.is_empty() || resamples == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0.0; z.len()];
    let mut estimates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in draw.iter_mut() {
            *slot = z[rng.random_range(0..z.len())];
        }
        draw.sort_by(f64::total_cmp);
        estimates.push(quantile_sorted(&draw, level));
    }
    estimates.sort_by(f64::total_cmp);
    let alpha = 1.0 - ci_level;
    Ok((
        quantile_sorted(&estimates, alpha / 2.0),
        quantile_sorted(&estimates, 1.0 - alpha / 2.0),
    ))
}

/// One estimate per (position, coverage), long first.
pub fn mincap_table(
    z: &[f64],
    sigma_hat: f64,
    coverages: &[f64],
    template: &MincapRequest,
) -> Result<Vec<MincapEstimate>> {
    [Position::Long, Position::Short]
        .iter()
        .flat_map(|&position| {
            coverages.iter().map(move |&coverage| MincapRequest {
                coverage,
                position,
                ..*template
            })
        })
        .map(|req| mincap(z, sigma_hat, &req))
        .collect()
}
