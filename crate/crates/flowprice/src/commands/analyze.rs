use chrono::DateTime;
use serde::Serialize;

use crate::cli::{AnalyzeArgs, ReportArgs, SynthArgs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{parse_timestamp, read_book, read_trades, RowIssue, TimestampFormat};
use crate::io::{emit, write_atomic, write_json};
use crate::pipeline::{analyze_day, grid_from_secs, records, report_csv, AnalyzeSettings, DayFits};
use crate::synth::{synth_day, SynthSpec};

#[derive(Debug, Serialize)]
struct FileDiagnostics {
    path: String,
    rows: usize,
    format: Option<TimestampFormat>,
    skipped: Vec<RowIssue>,
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    stock: String,
    day: String,
    day_start_ns: i64,
    windows: usize,
    buckets_per_window: usize,
    trades: FileDiagnostics,
    book: FileDiagnostics,
}

fn date_of(ts: i64) -> String {
    DateTime::from_timestamp_nanos(ts).format("%Y-%m-%d").to_string()
}

fn merge(cfg: &mut RunConfig, a: &AnalyzeArgs) {
    cfg.resolve_data_dir(a.data_dir.clone());
    if let Some(s) = &a.stock {
        cfg.stock = s.clone();
    }
    if a.day.is_some() {
        cfg.day = a.day.clone();
    }
    if a.day_start.is_some() {
        cfg.day_start = a.day_start.clone();
    }
    cfg.day_len_secs = a.day_len_secs.unwrap_or(cfg.day_len_secs);
    cfg.window_len_secs = a.window_len_secs.unwrap_or(cfg.window_len_secs);
    cfg.subinterval_secs = a.subinterval_secs.unwrap_or(cfg.subinterval_secs);
    cfg.time_unit = a.time_unit.unwrap_or(cfg.time_unit);
    cfg.adf_lags = a.adf_lags.unwrap_or(cfg.adf_lags);
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
}

pub fn run(mut cfg: RunConfig, a: AnalyzeArgs) -> Result<()> {
    merge(&mut cfg, &a);
    cfg.validate()?;
    let (trades_path, book_path) = match (&a.trades, &a.book) {
        (Some(t), Some(b)) => (t.clone(), b.clone()),
        (None, None) => {
            let day = cfg.day.clone().ok_or_else(|| CliError::bad("give --trades and --book, or --day with a data directory"))?;
            cfg.dataset_files(&day)
                .ok_or_else(|| CliError::bad("no data directory: pass --data-dir or set FLOWPRICE_DATA_DIR"))?
        }
        _ => return Err(CliError::bad("--trades and --book go together")),
    };
    let trades = read_trades(&trades_path, a.skip_bad)?;
    let book = read_book(&book_path, a.skip_bad)?;
    let day_start = match &cfg.day_start {
        Some(s) => parse_timestamp(s).map_err(CliError::bad)?,
        None => book.rows.first().map(|s| s.ts).ok_or_else(|| CliError::Data("book file has no rows".into()))?,
    };
    let grid = grid_from_secs(day_start, cfg.day_len_secs, cfg.window_len_secs, cfg.subinterval_secs)?;
    let day = cfg.day.clone().unwrap_or_else(|| date_of(day_start));
    let settings = AnalyzeSettings {
        stock: cfg.stock.clone(),
        day: day.clone(),
        grid,
        time_unit_ns: cfg.time_unit.nanos(),
        adf_lags: cfg.adf_lags,
    };
    let analysis = analyze_day(&trades.rows, &book.rows, settings, cfg.jobs)?;
    let out = &cfg.output_dir;
    analysis.write(out, a.emit_plotdata)?;
    let diag = Diagnostics {
        stock: cfg.stock.clone(),
        day,
        day_start_ns: day_start,
        windows: grid.n_windows(),
        buckets_per_window: grid.buckets_per_window(),
        trades: FileDiagnostics {
            path: trades_path.display().to_string(),
            rows: trades.rows.len(),
            format: trades.format,
            skipped: trades.skipped,
        },
        book: FileDiagnostics {
            path: book_path.display().to_string(),
            rows: book.rows.len(),
            format: book.format,
            skipped: book.skipped,
        },
    };
    if !diag.trades.skipped.is_empty() || !diag.book.skipped.is_empty() {
        eprintln!(
            "skipped {} trade rows and {} book rows",
            diag.trades.skipped.len(),
            diag.book.skipped.len()
        );
    }
    write_json(&out.join("diagnostics.json"), &diag)?;
    println!("{} windows x 6 models -> {}", analysis.windows.len(), out.display());
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<()> {
    let mut days = Vec::new();
    for p in &a.fits {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::MissingInput {
            path: p.clone(),
            reason: e.to_string(),
        })?;
        let d: DayFits =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        days.push(d);
    }
    let rows = flowprice_core::report::aggregate_report(&records(&days)?).map_err(|e| CliError::Data(e.to_string()))?;
    emit(a.out.as_deref(), &report_csv(&rows))
}

pub fn synth(cfg: RunConfig, a: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::default();
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.kappa = a.kappa.unwrap_or(spec.kappa);
    spec.phi = a.phi.unwrap_or(spec.phi);
    spec.e0 = a.e0.unwrap_or(spec.e0);
    spec.tau = a.tau.unwrap_or(spec.tau);
    let start = parse_timestamp(&a.day_start).map_err(CliError::bad)?;
    let grid = grid_from_secs(start, cfg.day_len_secs, cfg.window_len_secs, cfg.subinterval_secs)?;
    let day = synth_day(&spec, &grid, cfg.time_unit.nanos())?;
    let stem = format!("{}_{}", a.stock, date_of(start));
    write_atomic(&a.out.join(format!("{stem}_trades.csv")), &day.trades_csv(a.iso))?;
    write_atomic(&a.out.join(format!("{stem}_book.csv")), &day.book_csv(a.iso))?;
    write_json(&a.out.join(format!("{stem}_truth.json")), &spec)?;
    println!("{stem}: {} trades, {} snapshots", day.trades.len(), day.book.len());
    Ok(())
}
