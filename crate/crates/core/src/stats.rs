//! Distribution and serial-dependence diagnostics.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Four-moment summary with normal-iid significance thresholds.
///
/// Skewness is `m3 / m2^{3/2}` and kurtosis is excess kurtosis
/// `m4 / m2² − 3`, with central moments taken with divisor `n`. A coefficient
/// is flagged significant when it exceeds twice its standard error
/// (`√(6/T)` and `√(24/T)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_skew: f64,
    pub se_kurt: f64,
    pub skew_significant: bool,
    pub kurt_significant: bool,
}

impl SummaryStats {
    pub fn skew_threshold(&self) -> f64 {
        2.0 * self.se_skew
    }

    pub fn kurt_threshold(&self) -> f64 {
        2.0 * self.se_kurt
    }
}

pub fn skew_standard_error(n: usize) -> f64 {
    (6.0 / n as f64).sqrt()
}

pub fn kurt_standard_error(n: usize) -> f64 {
    (24.0 / n as f64).sqrt()
}

/// Two-sided 95% white-noise band for sample autocorrelations.
pub fn acf_band(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

fn check_finite(series: &[f64]) -> Result<()> {
    if series.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("series contains non-finite values"))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn summary(series: &[f64]) -> Result<SummaryStats> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    check_finite(series)?;
    let mu = mean(series);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in series {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    if m2 == 0.0 {
        return Err(Error::UndefinedMoments("series is constant".into()));
    }
    let sd = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let se_skew = skew_standard_error(n);
    let se_kurt = kurt_standard_error(n);
    Ok(SummaryStats {
        n,
        mean: mu,
        sd,
        skewness,
        excess_kurtosis,
        se_skew,
        se_kurt,
        skew_significant: skewness.abs() > 2.0 * se_skew,
        kurt_significant: excess_kurtosis.abs() > 2.0 * se_kurt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AcfTransform {
    Identity,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub rho: Vec<f64>,
    pub band: f64,
    pub n_outside: usize,
}

/// Sample autocorrelations at lags `1..=max_lag`, using the full-sample mean
/// and the lag-0 sum of squares as denominator.
pub fn acf(series: &[f64], max_lag: usize, transform: AcfTransform) -> Result<AcfResult> {
    let n = series.len();
    if max_lag == 0 || max_lag >= n {
        return Err(Error::invalid(format!(
            "max lag must be in 1..{n}, got {max_lag}"
        )));
    }
    check_finite(series)?;
    let x: Vec<f64> = match transform {
        AcfTransform::Identity => series.to_vec(),
        AcfTransform::Square => series.iter().map(|v| v * v).collect(),
    };
    let mu = mean(&x);
    let dev: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedMoments("series is constant".into()));
    }
    let rho: Vec<f64> = (1..=max_lag)
        .map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect();
    let band = acf_band(n);
    let n_outside = rho.iter().filter(|r| r.abs() > band).count();
    Ok(AcfResult {
        lags: (1..=max_lag).collect(),
        rho,
        band,
        n_outside,
    })
}

fn interpolate(lo: f64, hi: f64, frac: f64) -> f64 {
    lo + frac * (hi - lo)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("quantile level must be in (0, 1), got {alpha}")))
    }
}

/// Quantile of an already sorted slice: linear interpolation between order
/// statistics at one-based rank `alpha·(n−1) + 1`.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let h = alpha * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        interpolate(sorted[lo], sorted[lo + 1], frac)
    }
}

pub fn empirical_quantile(series: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if series.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if series.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("series contains NaN"));
    }
    let mut work = series.to_vec();
    let h = alpha * (work.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, &mut x_lo, upper) = work.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 {
        return Ok(x_lo);
    }
    let x_hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(interpolate(x_lo, x_hi, frac))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionData {
    pub bins: Vec<HistogramBin>,
    pub qq: Vec<QqPoint>,
}

/// Plot-ready density and normal q-q data.
///
/// The histogram uses the Freedman–Diaconis width `2·IQR·n^{−1/3}` (falling
/// back to √n equal bins when the IQR is zero). Q-q pairs compare standard
/// normal quantiles at `(i − 0.5)/n` with the standardized order statistics.
pub fn distribution_data(series: &[f64]) -> Result<DistributionData> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData { needed: 10, got: n });
    }
    check_finite(series)?;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[n - 1]);
    if min == max {
        return Err(Error::UndefinedMoments("series is constant".into()));
    }

    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let range = max - min;
    let mut n_bins = if iqr > 0.0 {
        (range / (2.0 * iqr / (n as f64).cbrt())).ceil() as usize
    } else {
        (n as f64).sqrt().ceil() as usize
    };
    n_bins = n_bins.clamp(1, n);
    let width = range / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for x in &sorted {
        let idx = (((x - min) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            left: min + width * i as f64,
            right: if i + 1 == n_bins { max } else { min + width * (i + 1) as f64 },
            count,
        })
        .collect();

    let mu = mean(&sorted);
    let sd = (sorted.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let normal = Normal::standard();
    let qq = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| QqPoint {
            theoretical: normal.inverse_cdf((i as f64 + 0.5) / n as f64),
            empirical: (x - mu) / sd,
        })
        .collect();
    Ok(DistributionData { bins, qq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn thresholds_at_375() {
        let s = summary(&normals(375, 1)).unwrap();
        assert!((s.skew_threshold() - 0.253).abs() < 5e-4);
        assert!((s.kurt_threshold() - 0.506).abs() < 5e-4);
        assert!((acf_band(375) - 0.1012).abs() < 1e-4);
    }

    #[test]
    fn symmetric_series_has_zero_skew() {
        let x: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let s = summary(&x).unwrap();
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.mean, 0.0);
        // two-point distribution: m4/m2² = 1
        assert!((s.excess_kurtosis + 2.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_moments() {
        // x = 1..5: mean 3, m2 = 2, m3 = 0, m4 = 6.8
        let s = summary(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((s.excess_kurtosis - (6.8 / 4.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn summary_errors() {
        assert!(matches!(summary(&[1.0, 2.0, 3.0]), Err(Error::InsufficientData { .. })));
        assert!(matches!(summary(&[2.0; 10]), Err(Error::UndefinedMoments(_))));
    }

    #[test]
    fn large_normal_sample_moments() {
        let s = summary(&normals(100_000, 7)).unwrap();
        assert!(s.skewness.abs() < 0.05, "{}", s.skewness);
        assert!(s.excess_kurtosis.abs() < 0.1, "{}", s.excess_kurtosis);
        assert!(!s.kurt_significant);
    }

    #[test]
    fn white_noise_acf() {
        let a = acf(&normals(375, 11), 20, AcfTransform::Identity).unwrap();
        assert_eq!(a.lags, (1..=20).collect::<Vec<_>>());
        assert!(a.n_outside <= 4, "{}", a.n_outside);
    }

    #[test]
    fn ar1_acf_matches_closed_form() {
        let eps = normals(100_000, 3);
        let phi = 0.5;
        let mut x = Vec::with_capacity(eps.len());
        let mut prev = 0.0;
        for e in eps {
            prev = phi * prev + e;
            x.push(prev);
        }
        let a = acf(&x, 5, AcfTransform::Identity).unwrap();
        for (k, r) in a.lags.iter().zip(&a.rho) {
            assert!((r - phi.powi(*k as i32)).abs() < 0.02, "lag {k}: {r}");
        }
    }

    #[test]
    fn acf_errors_and_square_transform() {
        assert!(acf(&[1.0, 2.0, 3.0], 3, AcfTransform::Identity).is_err());
        assert!(acf(&[1.0, 2.0, 3.0], 0, AcfTransform::Identity).is_err());
        assert!(matches!(
            acf(&[-1.0, 1.0, -1.0, 1.0, 1.0], 2, AcfTransform::Square),
            Err(Error::UndefinedMoments(_))
        ));
        let a = acf(&[-1.0, 1.0, -1.0, 1.0, 1.0], 2, AcfTransform::Identity).unwrap();
        assert!(a.rho[0] < 0.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[4.2], 0.01).unwrap(), 4.2);
        assert_eq!(empirical_quantile(&[4.2], 0.99).unwrap(), 4.2);
        let x: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(empirical_quantile(&x, 0.5).unwrap(), 50.5);
        assert!(empirical_quantile(&x, 0.0).is_err());
        assert!(empirical_quantile(&x, 1.0).is_err());
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn qq_near_diagonal_for_normal_sample() {
        let d = distribution_data(&normals(100_000, 5)).unwrap();
        let n = d.qq.len();
        // The extreme plotting positions are noisy; compare the central 99%.
        let max_dev = d.qq[n / 200..n - n / 200]
            .iter()
            .map(|p| (p.theoretical - p.empirical).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 0.1, "{max_dev}");
        assert_eq!(d.bins.iter().map(|b| b.count).sum::<usize>(), 100_000);
    }

    #[test]
    fn qq_is_location_invariant() {
        let x = normals(500, 9);
        let shifted: Vec<f64> = x.iter().map(|v| v + 42.0).collect();
        let a = distribution_data(&x).unwrap();
        let b = distribution_data(&shifted).unwrap();
        for (p, q) in a.qq.iter().zip(&b.qq) {
            assert_eq!(p.theoretical, q.theoretical);
            assert!((p.empirical - q.empirical).abs() < 1e-9);
        }
    }

    #[test]
    fn heavy_tails_bend_the_qq_plot() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t3 = StudentT::new(3.0).unwrap();
        let x: Vec<f64> = (0..5_000).map(|_| t3.sample(&mut rng)).collect();
        let d = distribution_data(&x).unwrap();
        let first = d.qq.first().unwrap();
        let last = d.qq.last().unwrap();
        assert!(first.empirical < first.theoretical);
        assert!(last.empirical > last.theoretical);
    }

    #[test]
    fn distribution_errors() {
        assert!(distribution_data(&[1.0; 5]).is_err());
        assert!(distribution_data(&[1.0; 20]).is_err());
    }

    proptest! {
        #[test]
        fn moments_are_affine_invariant(
            x in prop::collection::vec(-100.0f64..100.0, 8..60),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            if let Ok(s) = summary(&x) {
                let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let t = summary(&y).unwrap();
                prop_assert!((s.skewness - t.skewness).abs() < 1e-6);
                prop_assert!((s.excess_kurtosis - t.excess_kurtosis).abs() < 1e-6);
            }
        }

        #[test]
        fn acf_is_bounded(x in prop::collection::vec(-10.0f64..10.0, 25..80)) {
            if let Ok(a) = acf(&x, 20, AcfTransform::Identity) {
                prop_assert!(a.rho.iter().all(|r| r.abs() <= 1.0 + 1e-12));
            }
        }

        #[test]
        fn quantile_monotone_in_level(
            x in prop::collection::vec(-10.0f64..10.0, 1..50),
            a1 in 0.001f64..0.999,
            a2 in 0.001f64..0.999,
        ) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(empirical_quantile(&x, lo).unwrap() <= empirical_quantile(&x, hi).unwrap());
        }

        #[test]
        fn quantile_affine_equivariance(
            x in prop::collection::vec(-10.0f64..10.0, 1..50),
            alpha in 0.001f64..0.999,
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let q = empirical_quantile(&y, alpha).unwrap();
            let expected = if a >= 0.0 {
                a * empirical_quantile(&x, alpha).unwrap() + b
            } else {
                a * empirical_quantile(&x, 1.0 - alpha).unwrap() + b
            };
            prop_assert!((q - expected).abs() < 1e-9);
        }
    }
}
