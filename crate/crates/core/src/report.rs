//! Aggregation of window fits into per-stock, per-model summary rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    MfgTi,
    MfgOfi,
    FinTi,
    FinOfi,
    BenchTi,
    BenchOfi,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::MfgTi,
        ModelKind::MfgOfi,
        ModelKind::FinTi,
        ModelKind::FinOfi,
        ModelKind::BenchTi,
        ModelKind::BenchOfi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::MfgTi => "mfg_ti",
            ModelKind::MfgOfi => "mfg_ofi",
            ModelKind::FinTi => "fin_ti",
            ModelKind::FinOfi => "fin_ofi",
            ModelKind::BenchTi => "bench_ti",
            ModelKind::BenchOfi => "bench_ofi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// One fitted window.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub stock: String,
    pub day: String,
    pub window: usize,
    pub model: ModelKind,
    pub coeff_names: Vec<String>,
    pub coeffs: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub adf_statistic: Option<f64>,
    pub sq_rel_diff_mean: Option<f64>,
}

/// Sample mean and standard deviation (`n − 1` denominator, 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub stock: String,
    pub model: ModelKind,
    pub coeff_names: Vec<String>,
    pub coeffs: Vec<Summary>,
    pub r2: Summary,
    pub adj_r2: Summary,
    pub adf_statistic: Option<Summary>,
    pub sq_rel_diff_mean: Option<Summary>,
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let std = if n > 1 {
        let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        libm::sqrt(ss / (n - 1) as f64)
    } else {
        0.0
    };
    Some(Summary { mean, std, count: n })
}

/// Pools every window of every day for each `(stock, model)` pair. Rows come
/// out sorted by stock, then by model.
pub fn aggregate_report(fits: &[FitRecord]) -> Result<Vec<ReportRow>> {
    if fits.is_empty() {
        return Err(Error::Domain("no fits to aggregate".into()));
    }
    let mut groups: BTreeMap<(&str, ModelKind), Vec<&FitRecord>> = BTreeMap::new();
    for f in fits {
        groups.entry((f.stock.as_str(), f.model)).or_default().push(f);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((stock, model), members) in groups {
        let names = &members[0].coeff_names;
        if members.iter().any(|m| &m.coeff_names != names || m.coeffs.len() != names.len()) {
            return Err(Error::ShapeMismatch(format!(
                "inconsistent coefficient layout for {stock}/{}",
                model.as_str()
            )));
        }
        let column = |f: &dyn Fn(&FitRecord) -> f64| -> Vec<f64> { members.iter().map(|m| f(m)).collect() };
        let coeffs = (0..names.len())
            .map(|j| summarize(&column(&|m| m.coeffs[j])).expect("nonempty group"))
            .collect();
        let optional = |f: &dyn Fn(&FitRecord) -> Option<f64>| -> Option<Summary> {
            let vals: Vec<f64> = members.iter().filter_map(|m| f(m)).collect();
            summarize(&vals)
        };
        rows.push(ReportRow {
            stock: stock.into(),
            model,
            coeff_names: names.clone(),
            coeffs,
            r2: summarize(&column(&|m| m.r2)).expect("nonempty group"),
            adj_r2: summarize(&column(&|m| m.adj_r2)).expect("nonempty group"),
            adf_statistic: optional(&|m| m.adf_statistic),
            sq_rel_diff_mean: optional(&|m| m.sq_rel_diff_mean),
        });
    }
    Ok(rows)
}
