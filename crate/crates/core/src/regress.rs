//! Window regressions of the midprice on order-flow covariates.
//!
//! Columns follow the formed-price formula: `S0 = 1`, `S1 = t`,
//! `S2 = ∫(t − u)Λ(u)du`, `S3 = Λ(t)` and optionally `S4 = ∫Λ(u)du`, all
//! integrals running from the window start. With a model price
//! `p0 + 2φE₀t − 2φ∫(t−u)Λ + 2κ(Λ(t) − Λ(0))` the coefficients are
//! `a1 = 2φE₀`, `a2 = −2φ`, `a3 = 2κ`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::adf::AdfResult;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::path::{cumulative_trapezoid, memory_integral};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = target.len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "column {name} has {} rows, target has {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("column {name} has non-finite entries")));
            }
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("target has non-finite entries".into()));
        }
        Ok(Self { names, columns, target })
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// Builds `S0..S3` (and `S4` when requested) from a flow series sampled at
/// uniformly spaced `times`.
pub fn build_covariates(lambda: &[f64], times: &[f64], include_s4: bool, target: &[f64]) -> Result<DesignMatrix> {
    let n = lambda.len();
    if n < 2 {
        return Err(Error::Domain(format!("{n} points are too few for a regression window")));
    }
    if times.len() != n {
        return Err(Error::ShapeMismatch(format!("{} times for {n} flow points", times.len())));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    let span_tol = 1e-9 * (libm::fabs(times[0]) + libm::fabs(times[n - 1]) + dt);
    for (k, t) in times.iter().enumerate() {
        if libm::fabs(t - (times[0] + k as f64 * dt)) > span_tol {
            return Err(Error::Domain(format!("times are not uniformly spaced at index {k}")));
        }
    }
    let mut names: Vec<String> = ["S0", "S1", "S2", "S3"].iter().map(|s| String::from(*s)).collect();
    let mut columns = alloc::vec![
        alloc::vec![1.0; n],
        times.to_vec(),
        memory_integral(lambda, dt),
        lambda.to_vec(),
    ];
    if include_s4 {
        names.push("S4".into());
        columns.push(cumulative_trapezoid(lambda, dt));
    }
    DesignMatrix::new(names, columns, target.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coeffs: Vec<f64>,
    /// `None` for columns dropped as collinear.
    pub std_errors: Vec<Option<f64>>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub p: usize,
    pub rank: usize,
    pub collinear: Vec<bool>,
    /// The target had zero variance; `r2` is reported as 0.
    pub degenerate: bool,
    pub adf: Option<AdfResult>,
}

impl RegressionFit {
    pub fn coeff(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coeffs[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.std_errors[i])
    }
}

pub fn ols_fit(x: &DesignMatrix) -> Result<RegressionFit> {
    let n = x.n();
    let p = x.p();
    if n <= p {
        return Err(Error::Underdetermined { n, p });
    }
    let ls = least_squares(&x.columns, &x.target);
    let fitted: Vec<f64> = (0..n)
        .map(|i| x.columns.iter().zip(&ls.coeffs).map(|(c, b)| c[i] * b).sum())
        .collect();
    let residuals: Vec<f64> = x.target.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = x.target.iter().sum::<f64>() / n as f64;
    let sst: f64 = x.target.iter().map(|y| (y - mean) * (y - mean)).sum();
    let scale = x.target.iter().fold(0.0f64, |m, y| m.max(libm::fabs(*y)));
    let floor = n as f64 * (16.0 * f64::EPSILON * scale) * (16.0 * f64::EPSILON * scale);
    let degenerate = sst <= floor;
    let r2 = if degenerate { 0.0 } else { 1.0 - ssr / sst };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n - p) as f64;
    let sigma2 = if n > ls.rank { ssr / (n - ls.rank) as f64 } else { 0.0 };
    let std_errors = ls
        .unscaled_variance
        .iter()
        .map(|v| v.map(|v| libm::sqrt(v * sigma2)))
        .collect();
    Ok(RegressionFit {
        names: x.names.clone(),
        coeffs: ls.coeffs,
        std_errors,
        fitted,
        residuals,
        r2,
        adj_r2,
        n,
        p,
        rank: ls.rank,
        collinear: ls.dependent,
        degenerate,
        adf: None,
    })
}

/// Regresses price increments `Δ𝔭_k = 𝔭_k − 𝔭_{k−1}` on `{1, metric_k}`
/// for `k ≥ 1`.
pub fn benchmark_fit(metric: &[f64], midprice: &[f64]) -> Result<RegressionFit> {
    if metric.len() != midprice.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} metric points for {} prices",
            metric.len(),
            midprice.len()
        )));
    }
    if metric.len() < 2 {
        return Err(Error::Domain("benchmark needs at least two points".into()));
    }
    let diff: Vec<f64> = midprice.windows(2).map(|w| w[1] - w[0]).collect();
    let design = DesignMatrix::new(
        alloc::vec!["c0".into(), "c1".into()],
        alloc::vec![alloc::vec![1.0; diff.len()], metric[1..].to_vec()],
        diff,
    )?;
    ols_fit(&design)
}

/// Price level implied by a benchmark fit: `𝔭_{k−1} + Δ𝔭̂_k` for `k ≥ 1`.
pub fn benchmark_price(fit: &RegressionFit, midprice: &[f64]) -> Result<Vec<f64>> {
    if fit.fitted.len() + 1 != midprice.len() {
        return Err(Error::ShapeMismatch("benchmark fit does not match the price series".into()));
    }
    Ok(midprice.iter().zip(&fit.fitted).map(|(p, d)| p + d).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquaredRelDiff {
    pub values: Vec<f64>,
    pub mean: f64,
}

/// `((model − 𝔭)/𝔭)²` point by point and its mean.
pub fn squared_rel_diff(model: &[f64], midprice: &[f64]) -> Result<SquaredRelDiff> {
    if model.len() != midprice.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} model points for {} prices",
            model.len(),
            midprice.len()
        )));
    }
    if model.is_empty() {
        return Err(Error::Domain("empty series".into()));
    }
    if let Some(index) = midprice.iter().position(|p| *p == 0.0) {
        return Err(Error::ZeroMidprice { index });
    }
    let values: Vec<f64> = model
        .iter()
        .zip(midprice)
        .map(|(m, p)| {
            let r = (m - p) / p;
            r * r
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(SquaredRelDiff { values, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn constant_flow_covariates() {
        let t: Vec<f64> = (0..20).map(|k| 30.0 + k as f64 / 6.0).collect();
        let lam = vec![3.0; 20];
        let d = build_covariates(&lam, &t, true, &[0.0; 20]).unwrap();
        let s2 = d.column("S2").unwrap();
        let s4 = d.column("S4").unwrap();
        for k in 0..20 {
            let s = t[k] - t[0];
            assert!((s2[k] - 3.0 * s * s / 2.0).abs() < 1e-12);
            assert!((s4[k] - 3.0 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(build_covariates(&[1.0], &[0.0], false, &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_linear_data() {
        let t = times(10, 1.0);
        let d = DesignMatrix::new(
            vec!["S0".into(), "S1".into()],
            vec![vec![1.0; 10], t.clone()],
            t.iter().map(|x| 2.0 + 3.0 * x).collect(),
        )
        .unwrap();
        let f = ols_fit(&d).unwrap();
        assert!((f.coeffs[0] - 2.0).abs() < 1e-12 && (f.coeffs[1] - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_target_is_degenerate() {
        let t = times(10, 1.0);
        let d = DesignMatrix::new(vec!["S0".into(), "S1".into()], vec![vec![1.0; 10], t], vec![100.1; 10]).unwrap();
        let f = ols_fit(&d).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.r2, 0.0);
        assert!(f.coeffs[1].abs() < 1e-12);
    }

    #[test]
    fn underdetermined() {
        let d = DesignMatrix::new(vec!["S0".into(), "S1".into()], vec![vec![1.0; 2], vec![0.0, 1.0]], vec![1.0, 2.0]).unwrap();
        assert!(matches!(ols_fit(&d), Err(Error::Underdetermined { n: 2, p: 2 })));
    }

    #[test]
    fn benchmark_exact_and_zero_metric() {
        let metric: Vec<f64> = (0..30).map(|k| ((k * 7) % 11) as f64 - 5.0).collect();
        let mut price = vec![100.0];
        for k in 1..30 {
            let last = price[k - 1];
            price.push(last + 0.5 + 2.0 * metric[k]);
        }
        let f = benchmark_fit(&metric, &price).unwrap();
        assert!((f.coeffs[0] - 0.5).abs() < 1e-10 && (f.coeffs[1] - 2.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);

        let zero = vec![0.0; 30];
        let f = benchmark_fit(&zero, &price).unwrap();
        let mean = (price[29] - price[0]) / 29.0;
        assert_eq!(f.coeffs[1], 0.0);
        assert!((f.coeffs[0] - mean).abs() < 1e-10);
    }

    #[test]
    fn squared_relative_difference() {
        let p = vec![100.0, 50.0, 25.0];
        assert!(squared_rel_diff(&p, &p).unwrap().values.iter().all(|v| *v == 0.0));
        let m: Vec<f64> = p.iter().map(|x| 1.01 * x).collect();
        for v in squared_rel_diff(&m, &p).unwrap().values {
            assert!((v - 1e-4).abs() < 1e-15);
        }
        assert!(matches!(
            squared_rel_diff(&[1.0, 1.0], &[1.0, 0.0]),
            Err(Error::ZeroMidprice { index: 1 })
        ));
    }
}
