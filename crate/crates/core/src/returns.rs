//! Percent log returns at the intraday and daily horizon.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::IntradayGrid;

/// Per-day intraday percent log returns, `100·(ln p_j − ln p_{j−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayReturns {
    days: Vec<NaiveDate>,
    returns: Vec<Vec<f64>>,
}

impl IntradayReturns {
    pub fn new(days: Vec<NaiveDate>, returns: Vec<Vec<f64>>) -> Result<Self> {
        if days.len() != returns.len() {
            return Err(Error::Misaligned(format!(
                "{} days but {} return vectors",
                days.len(),
                returns.len()
            )));
        }
        let width = returns.first().map_or(0, Vec::len);
        if width == 0 && !returns.is_empty() {
            return Err(Error::invalid("days must contain at least one return"));
        }
        for (day, row) in days.iter().zip(&returns) {
            if row.len() != width {
                return Err(Error::Misaligned(format!(
                    "{day} has {} returns, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|r| !r.is_finite()) {
                return Err(Error::invalid(format!("non-finite return on {day}")));
            }
        }
        Ok(Self { days, returns })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Returns per day (`m`).
    pub fn intervals(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, &[f64])> {
        self.days.iter().copied().zip(self.returns.iter().map(Vec::as_slice))
    }

    /// Applies `f` to every return, keeping the layout.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let returns = self
            .returns
            .iter()
            .map(|row| row.iter().map(|&r| f(r)).collect())
            .collect();
        Self::new(self.days.clone(), returns)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyReturns {
    pub days: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DailyReturns {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn intraday_log_returns(grid: &IntradayGrid) -> Result<IntradayReturns> {
    let mut returns = Vec::with_capacity(grid.len());
    for (day, prices) in grid.days().iter().zip(grid.prices()) {
        if let Some(&price) = prices.iter().find(|p| p.is_nan() || **p <= 0.0) {
            return Err(Error::NonPositivePrice { day: *day, price });
        }
        let logs: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
        returns.push(logs.windows(2).map(|w| 100.0 * (w[1] - w[0])).collect());
    }
    IntradayReturns::new(grid.days().to_vec(), returns)
}

/// Sums each day's intraday returns (left to right).
pub fn daily_return(intra: &IntradayReturns) -> DailyReturns {
    DailyReturns {
        days: intra.days().to_vec(),
        values: intra
            .returns()
            .iter()
            .map(|row| row.iter().fold(0.0, |acc, r| acc + r))
            .collect(),
    }
}
