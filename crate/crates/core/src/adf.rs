//! Augmented Dickey–Fuller unit-root test.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Deterministic terms included in the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdfRegression {
    /// `Δy_t` on `{1, y_{t−1}, lagged Δy}`.
    Constant,
    /// `Δy_t` on `{1, t, y_{t−1}, lagged Δy}`.
    #[default]
    ConstantTrend,
}

/// 5% critical values at `n = 25, 50, 100, 250, 500` and the asymptote.
const SAMPLE_SIZES: [f64; 5] = [25.0, 50.0, 100.0, 250.0, 500.0];
const CRIT_CONSTANT: [f64; 6] = [-3.00, -2.93, -2.89, -2.88, -2.87, -2.86];
const CRIT_TREND: [f64; 6] = [-3.60, -3.50, -3.45, -3.43, -3.42, -3.41];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfResult {
    /// t-ratio of the `y_{t−1}` coefficient.
    pub statistic: f64,
    pub lags: usize,
    /// Length of the tested series.
    pub n: usize,
    pub regression: AdfRegression,
    pub critical_5pct: f64,
    pub reject_5pct: bool,
}

/// 5% critical value for a series of length `n`.
///
/// With a trend the value is −3.43 for `200 ≤ n ≤ 300`. Elsewhere the table
/// is interpolated linearly in `n`, beyond 500 linearly in `1/n` towards the
/// asymptote, and clamped at the `n = 25` entry below.
pub fn critical_value_5pct(n: usize, regression: AdfRegression) -> f64 {
    let table = match regression {
        AdfRegression::Constant => &CRIT_CONSTANT,
        AdfRegression::ConstantTrend => &CRIT_TREND,
    };
    let x = n as f64;
    if regression == AdfRegression::ConstantTrend && (200..=300).contains(&n) {
        return -3.43;
    }
    if x <= SAMPLE_SIZES[0] {
        return table[0];
    }
    if x >= SAMPLE_SIZES[4] {
        let w = SAMPLE_SIZES[4] / x;
        return table[5] + w * (table[4] - table[5]);
    }
    let i = SAMPLE_SIZES.iter().rposition(|&s| s <= x).unwrap_or(0);
    let (x0, x1) = (SAMPLE_SIZES[i], SAMPLE_SIZES[i + 1]);
    table[i] + (x - x0) / (x1 - x0) * (table[i + 1] - table[i])
}

/// Runs the test with the default trend regression.
pub fn adf_test(series: &[f64], lags: usize) -> Result<AdfResult> {
    adf_test_with(series, lags, AdfRegression::default())
}

pub fn adf_test_with(series: &[f64], lags: usize, regression: AdfRegression) -> Result<AdfResult> {
    let n = series.len();
    if n <= lags + 10 {
        return Err(Error::Domain(format!(
            "series of length {n} is too short for {lags} lags"
        )));
    }
    if let Some(k) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("series value {k} is not finite")));
    }
    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // Observations t = lags + 1 .. n − 1 index Δy_t = diff[t − 1].
    let rows: Vec<usize> = (lags + 1..n).collect();
    let target: Vec<f64> = rows.iter().map(|&t| diff[t - 1]).collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    columns.push(alloc::vec![1.0; rows.len()]);
    if regression == AdfRegression::ConstantTrend {
        columns.push(rows.iter().map(|&t| t as f64).collect());
    }
    let level = columns.len();
    columns.push(rows.iter().map(|&t| series[t - 1]).collect());
    for j in 1..=lags {
        columns.push(rows.iter().map(|&t| diff[t - 1 - j]).collect());
    }

    let m = rows.len();
    let p = columns.len();
    if m <= p {
        return Err(Error::Domain(format!("{m} observations for {p} regressors")));
    }
    let ls = least_squares(&columns, &target);
    let ssr: f64 = (0..m)
        .map(|i| {
            let fit: f64 = columns.iter().zip(&ls.coeffs).map(|(c, b)| c[i] * b).sum();
            let r = target[i] - fit;
            r * r
        })
        .sum();
    let se = match ls.unscaled_variance[level] {
        Some(v) if !ls.dependent[level] => libm::sqrt(v * ssr / (m - ls.rank) as f64),
        _ => {
            return Err(Error::Domain(
                "lagged level is collinear with the deterministic terms".into(),
            ))
        }
    };
    if se.is_nan() || se <= 0.0 {
        return Err(Error::Domain("zero standard error on the lagged level".into()));
    }
    let statistic = ls.coeffs[level] / se;
    let critical_5pct = critical_value_5pct(n, regression);
    Ok(AdfResult {
        statistic,
        lags,
        n,
        regression,
        critical_5pct,
        reject_5pct: statistic < critical_5pct,
    })
}
