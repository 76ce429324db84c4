//! Window-by-window regression analysis of one trading day.

use std::collections::BTreeMap;
use std::path::Path;

use flowprice_core::adf::adf_test;
use flowprice_core::orderflow::{
    bucket_times, build_windows, lambda_series, midprice_series, ofi_series, trade_imbalance, BookSnapshot,
    TradeEvent, WindowGrid,
};
use flowprice_core::regress::{benchmark_fit, benchmark_price, build_covariates, ols_fit, squared_rel_diff, RegressionFit};
use flowprice_core::report::{aggregate_report, FitRecord, ModelKind, ReportRow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{num, opt_num, write_atomic, write_json, Table};

#[derive(Debug, Clone)]
pub struct AnalyzeSettings {
    pub stock: String,
    pub day: String,
    pub grid: WindowGrid,
    pub time_unit_ns: i64,
    pub adf_lags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfJson {
    pub statistic: f64,
    pub lags: usize,
    pub n: usize,
    pub critical_5pct: f64,
    pub reject_5pct: bool,
}

/// One model fitted on one window, as written to the fit JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub window: usize,
    pub model: String,
    pub coeffs: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, Option<f64>>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub p: usize,
    pub degenerate: bool,
    pub collinear: Vec<String>,
    pub adf: Option<AdfJson>,
    pub sq_rel_diff_mean: f64,
}

/// All fits of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayFits {
    pub stock: String,
    pub day: String,
    pub fits: Vec<FitJson>,
}

#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: ModelKind,
    pub fit: RegressionFit,
    /// Model price and the midprice it is compared with.
    pub model_price: Vec<f64>,
    pub midprice: Vec<f64>,
    pub sq_rel_diff: Vec<f64>,
    pub sq_rel_diff_mean: f64,
}

#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub index: usize,
    pub times: Vec<f64>,
    pub ti: Vec<f64>,
    pub ofi: Vec<f64>,
    pub midprice: Vec<f64>,
    pub fits: Vec<ModelFit>,
}

#[derive(Debug, Clone)]
pub struct DayAnalysis {
    pub settings: AnalyzeSettings,
    pub windows: Vec<WindowAnalysis>,
}

pub fn grid_from_secs(day_start: i64, day_len: u64, window_len: u64, subinterval: u64) -> Result<WindowGrid> {
    let ns = |s: u64| {
        i64::try_from(s)
            .ok()
            .and_then(|s| s.checked_mul(1_000_000_000))
            .ok_or_else(|| CliError::bad(format!("duration {s} s is too long")))
    };
    Ok(build_windows(day_start, ns(day_len)?, ns(window_len)?, ns(subinterval)?)?)
}

fn data_err(window: usize, e: flowprice_core::Error) -> CliError {
    CliError::Data(format!("window {window}: {e}"))
}

fn finish(model: ModelKind, mut fit: RegressionFit, model_price: Vec<f64>, midprice: Vec<f64>, lags: usize, window: usize) -> Result<ModelFit> {
    // A perfect fit leaves nothing to test; the ADF entry is then absent.
    fit.adf = adf_test(&fit.residuals, lags).ok();
    let sq = squared_rel_diff(&model_price, &midprice).map_err(|e| data_err(window, e))?;
    Ok(ModelFit { model, fit, model_price, midprice, sq_rel_diff: sq.values, sq_rel_diff_mean: sq.mean })
}

pub fn analyze_window(trades: &[TradeEvent], book: &[BookSnapshot], s: &AnalyzeSettings, window: usize) -> Result<WindowAnalysis> {
    let err = |e| data_err(window, e);
    let ti = trade_imbalance(trades, &s.grid, window).map_err(err)?;
    let ofi = ofi_series(book, &s.grid, window).map_err(err)?;
    let mid = midprice_series(book, &s.grid, window).map_err(err)?;
    let times = bucket_times(&s.grid, window, s.time_unit_ns).map_err(err)?;
    let mut fits = Vec::with_capacity(6);
    for model in ModelKind::ALL {
        let metric = match model {
            ModelKind::MfgTi | ModelKind::FinTi | ModelKind::BenchTi => &ti,
            _ => &ofi,
        };
        let f = match model {
            ModelKind::BenchTi | ModelKind::BenchOfi => {
                let fit = benchmark_fit(metric, &mid).map_err(err)?;
                let price = benchmark_price(&fit, &mid).map_err(err)?;
                finish(model, fit, price, mid[1..].to_vec(), s.adf_lags, window)?
            }
            _ => {
                let micro = matches!(model, ModelKind::FinTi | ModelKind::FinOfi);
                let design = build_covariates(&lambda_series(metric), &times, micro, &mid).map_err(err)?;
                let fit = ols_fit(&design).map_err(err)?;
                let price = fit.fitted.clone();
                finish(model, fit, price, mid.clone(), s.adf_lags, window)?
            }
        };
        fits.push(f);
    }
    Ok(WindowAnalysis { index: window, times, ti, ofi, midprice: mid, fits })
}

/// Fits every window on a pool of `jobs` threads. Results are in window order.
pub fn analyze_day(trades: &[TradeEvent], book: &[BookSnapshot], settings: AnalyzeSettings, jobs: Option<usize>) -> Result<DayAnalysis> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::bad(e.to_string()))?;
    let n = settings.grid.n_windows();
    let windows = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| analyze_window(trades, book, &settings, i))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(DayAnalysis { settings, windows })
}

impl ModelFit {
    pub fn to_json(&self, window: usize) -> FitJson {
        let f = &self.fit;
        FitJson {
            window,
            model: self.model.as_str().into(),
            coeffs: f.names.iter().cloned().zip(f.coeffs.iter().copied()).collect(),
            std_errors: f.names.iter().cloned().zip(f.std_errors.iter().copied()).collect(),
            r2: f.r2,
            adj_r2: f.adj_r2,
            n: f.n,
            p: f.p,
            degenerate: f.degenerate,
            collinear: f.names.iter().zip(&f.collinear).filter(|(_, c)| **c).map(|(n, _)| n.clone()).collect(),
            adf: f.adf.as_ref().map(|a| AdfJson {
                statistic: a.statistic,
                lags: a.lags,
                n: a.n,
                critical_5pct: a.critical_5pct,
                reject_5pct: a.reject_5pct,
            }),
            sq_rel_diff_mean: self.sq_rel_diff_mean,
        }
    }
}

impl DayAnalysis {
    pub fn day_fits(&self) -> DayFits {
        DayFits {
            stock: self.settings.stock.clone(),
            day: self.settings.day.clone(),
            fits: self.windows.iter().flat_map(|w| w.fits.iter().map(|f| f.to_json(w.index))).collect(),
        }
    }

    /// Series CSV `k,t,TI,OFI,lambda` of one window, with `lambda = −TI`.
    pub fn series_csv(&self, w: &WindowAnalysis) -> Vec<u8> {
        let mut t = Table::new(["k", "t", "TI", "OFI", "lambda"]);
        for k in 0..w.ti.len() {
            t.row([k.to_string(), num(w.times[k]), num(w.ti[k]), num(w.ofi[k]), num(-w.ti[k])]);
        }
        t.into_bytes()
    }

    pub fn sq_rel_diff_csv(&self) -> Vec<u8> {
        let mut t = Table::new(["stock", "day", "window", "model", "mean"]);
        for w in &self.windows {
            for f in &w.fits {
                t.row([
                    self.settings.stock.clone(),
                    self.settings.day.clone(),
                    w.index.to_string(),
                    f.model.as_str().into(),
                    num(f.sq_rel_diff_mean),
                ]);
            }
        }
        t.into_bytes()
    }

    /// Tidy per-point prices for external plotting.
    pub fn plot_csv(&self) -> Vec<u8> {
        let mut t = Table::new(["window", "model", "k", "midprice", "model_price", "sq_rel_diff"]);
        for w in &self.windows {
            for f in &w.fits {
                let offset = w.midprice.len() - f.midprice.len();
                for j in 0..f.midprice.len() {
                    t.row([
                        w.index.to_string(),
                        f.model.as_str().into(),
                        (j + offset).to_string(),
                        num(f.midprice[j]),
                        num(f.model_price[j]),
                        num(f.sq_rel_diff[j]),
                    ]);
                }
            }
        }
        t.into_bytes()
    }

    /// Writes fits, series, relative differences and the day report under `dir`.
    pub fn write(&self, dir: &Path, emit_plotdata: bool) -> Result<()> {
        let day = self.day_fits();
        write_json(&dir.join("fits.json"), &day)?;
        for w in &self.windows {
            let fits: Vec<&FitJson> = day.fits.iter().filter(|f| f.window == w.index).collect();
            let doc = serde_json::json!({
                "stock": day.stock,
                "day": day.day,
                "window": w.index,
                "fits": fits,
            });
            write_json(&dir.join("fits").join(format!("window_{:02}.json", w.index)), &doc)?;
            write_atomic(&dir.join("series").join(format!("window_{:02}.csv", w.index)), &self.series_csv(w))?;
        }
        write_atomic(&dir.join("sq_rel_diff.csv"), &self.sq_rel_diff_csv())?;
        let rows = aggregate_report(&records(&[day])?)?;
        write_atomic(&dir.join("report.csv"), &report_csv(&rows))?;
        if emit_plotdata {
            write_atomic(&dir.join("plotdata").join("prices.csv"), &self.plot_csv())?;
        }
        Ok(())
    }
}

/// Flattens day fit files into records for aggregation.
pub fn records(days: &[DayFits]) -> Result<Vec<FitRecord>> {
    let mut out = Vec::new();
    for d in days {
        for f in &d.fits {
            let model = ModelKind::parse(&f.model).ok_or_else(|| CliError::Data(format!("unknown model {:?}", f.model)))?;
            out.push(FitRecord {
                stock: d.stock.clone(),
                day: d.day.clone(),
                window: f.window,
                model,
                coeff_names: f.coeffs.keys().cloned().collect(),
                coeffs: f.coeffs.values().copied().collect(),
                r2: f.r2,
                adj_r2: f.adj_r2,
                adf_statistic: f.adf.as_ref().map(|a| a.statistic),
                sq_rel_diff_mean: Some(f.sq_rel_diff_mean),
            });
        }
    }
    Ok(out)
}

/// Report with one column per model and one row per stock and statistic.
pub fn report_csv(rows: &[ReportRow]) -> Vec<u8> {
    let mut t = Table::new(["stock", "statistic"].into_iter().chain(ModelKind::ALL.map(|m| m.as_str())));
    let mut stocks: Vec<&str> = rows.iter().map(|r| r.stock.as_str()).collect();
    stocks.dedup();
    for stock in stocks {
        let by_model: BTreeMap<ModelKind, &ReportRow> =
            rows.iter().filter(|r| r.stock == stock).map(|r| (r.model, r)).collect();
        let mut line = |name: String, get: &dyn Fn(&ReportRow) -> Option<f64>| {
            let cells = ModelKind::ALL.map(|m| opt_num(by_model.get(&m).and_then(|r| get(r))));
            t.row([stock.to_string(), name].into_iter().chain(cells));
        };
        line("windows".into(), &|r| Some(r.r2.count as f64));
        line("r2_mean".into(), &|r| Some(r.r2.mean));
        line("r2_std".into(), &|r| Some(r.r2.std));
        line("adj_r2_mean".into(), &|r| Some(r.adj_r2.mean));
        line("adj_r2_std".into(), &|r| Some(r.adj_r2.std));
        line("adf_mean".into(), &|r| r.adf_statistic.map(|s| s.mean));
        line("adf_std".into(), &|r| r.adf_statistic.map(|s| s.std));
        line("sq_rel_diff_mean".into(), &|r| r.sq_rel_diff_mean.map(|s| s.mean));
        line("sq_rel_diff_std".into(), &|r| r.sq_rel_diff_mean.map(|s| s.std));
        let mut names: Vec<&String> = by_model.values().flat_map(|r| r.coeff_names.iter()).collect();
        names.sort();
        names.dedup();
        for name in names {
            let pick = |r: &ReportRow| r.coeff_names.iter().position(|n| n == name).map(|i| r.coeffs[i]);
            line(format!("{name}_mean"), &|r| pick(r).map(|s| s.mean));
            line(format!("{name}_std"), &|r| pick(r).map(|s| s.std));
        }
    }
    t.into_bytes()
}
