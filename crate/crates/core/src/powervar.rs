//! Realized power variation volatility proxies and standardized returns.
//!
//! A daily proxy is the sum over the day's intervals of `|r_j|^p`. The
//! absolute base with power `c` uses `p = c`; the squared base with power `c`
//! uses `p = 2c`. Because the exponent is applied per interval to `|r_j|` in
//! both cases, `(absolute, c)` and `(squared, c/2)` produce bit-identical
//! series.
//!
//! The normalized estimator `m^{p/2−1} / mu_p · Σ|r_j|^p`, with
//! `mu_p = E|N(0,1)|^p`, converges to the integrated power volatility
//! `∫σ^p` as the number of intervals `m` grows.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::returns::{DailyReturns, IntradayReturns};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Absolute,
    Squared,
}

impl Base {
    pub fn as_str(self) -> &'static str {
        match self {
            Base::Absolute => "abs",
            Base::Squared => "sq",
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abs" | "absolute" => Ok(Base::Absolute),
            "sq" | "squared" => Ok(Base::Squared),
            other => Err(Error::invalid(format!("unknown base `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerVariationSpec {
    pub base: Base,
    pub power: f64,
    pub normalized: bool,
    pub intervals_m: usize,
}

impl PowerVariationSpec {
    pub fn new(base: Base, power: f64, intervals_m: usize) -> Self {
        Self {
            base,
            power,
            normalized: false,
            intervals_m,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalized = true;
        self
    }

    /// Per-interval exponent applied to `|r_j|`.
    pub fn exponent(&self) -> f64 {
        match self.base {
            Base::Absolute => self.power,
            Base::Squared => 2.0 * self.power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::invalid(format!("power must be positive, got {}", self.power)));
        }
        if self.intervals_m == 0 {
            return Err(Error::invalid("intervals_m must be positive"));
        }
        if self.normalized {
            check_normalized_exponent(self.exponent())?;
        }
        Ok(())
    }

    /// Short label such as `abs_1.00`.
    pub fn label(&self) -> String {
        let norm = if self.normalized { "_norm" } else { "" };
        format!("{}_{:.2}{norm}", self.base, self.power)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("exponent must be positive, got {p}")))
    }
}

fn check_normalized_exponent(p: f64) -> Result<()> {
    if (0.5..3.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "normalized power variation requires 0.5 <= p < 3, got {p}"
        )))
    }
}

/// `E|Z|^p` for a standard normal `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalAbsMoment {
    pub p: f64,
    pub mu_p: f64,
}

impl NormalAbsMoment {
    pub fn new(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self {
            p,
            mu_p: abs_moment(p),
        })
    }
}

/// `2^{p/2} Γ((p+1)/2) / √π`.
pub fn abs_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySeries {
    pub days: Vec<NaiveDate>,
    pub sigma: Vec<f64>,
    pub spec: PowerVariationSpec,
}

impl VolatilitySeries {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedReturns {
    pub days: Vec<NaiveDate>,
    pub z: Vec<f64>,
    pub proxy_spec: PowerVariationSpec,
}

#[derive(Debug, Clone)]
pub struct Standardization {
    pub series: StandardizedReturns,
    /// Days skipped because the proxy was zero.
    pub excluded: Vec<NaiveDate>,
}

fn day_power_sum(row: &[f64], p: f64) -> f64 {
    row.iter().fold(0.0, |acc, r| acc + r.abs().powf(p))
}

/// `Σ_j |r_j|^p` for every day.
pub fn realized_power_variation(intra: &IntradayReturns, p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    Ok(intra.returns().iter().map(|row| day_power_sum(row, p)).collect())
}

pub fn normalized_rpv(intra: &IntradayReturns, p: f64, m: usize) -> Result<Vec<f64>> {
    check_normalized_exponent(p)?;
    if m != intra.intervals() {
        return Err(Error::invalid(format!(
            "m = {m} does not match {} intervals per day",
            intra.intervals()
        )));
    }
    let scale = normalization(p, m);
    Ok(intra
        .returns()
        .iter()
        .map(|row| scale * day_power_sum(row, p))
        .collect())
}

/// `m^{p/2−1} / mu_p`; exactly 1 for `p = 2`.
pub fn normalization(p: f64, m: usize) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (m as f64).powf(p / 2.0 - 1.0) / abs_moment(p)
    }
}

/// Normalized power variation of a single day's returns.
pub fn normalized_day(row: &[f64], p: f64) -> f64 {
    normalization(p, row.len()) * day_power_sum(row, p)
}

pub fn volatility_proxy(intra: &IntradayReturns, spec: &PowerVariationSpec) -> Result<VolatilitySeries> {
    spec.validate()?;
    let p = spec.exponent();
    let sigma = if spec.normalized {
        normalized_rpv(intra, p, spec.intervals_m)?
    } else {
        realized_power_variation(intra, p)?
    };
    Ok(VolatilitySeries {
        days: intra.days().to_vec(),
        sigma,
        spec: *spec,
    })
}

/// `z_t = r_t / σ_t` on days where the proxy is positive.
pub fn standardize(daily: &DailyReturns, vol: &VolatilitySeries) -> Result<Standardization> {
    if daily.days != vol.days {
        return Err(Error::Misaligned(format!(
            "daily returns cover {} days, volatility {} days",
            daily.days.len(),
            vol.days.len()
        )));
    }
    let mut days = Vec::with_capacity(daily.len());
    let mut z = Vec::with_capacity(daily.len());
    let mut excluded = Vec::new();
    for ((day, r), s) in daily.days.iter().zip(&daily.values).zip(&vol.sigma) {
        if *s > 0.0 {
            days.push(*day);
            z.push(r / s);
        } else {
            excluded.push(*day);
        }
    }
    Ok(Standardization {
        series: StandardizedReturns {
            days,
            z,
            proxy_spec: vol.spec,
        },
        excluded,
    })
}
