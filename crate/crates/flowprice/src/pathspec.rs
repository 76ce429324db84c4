//! Deterministic paths given on the command line.
//!
//! * `const:V` is the constant `V`.
//! * `linear:A,B` is `A + B t`.
//! * `file:PATH` reads a `time,value` CSV and interpolates linearly onto the grid.

use std::path::{Path, PathBuf};

use flowprice_core::{SampledPath, TimeGrid};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    Const(f64),
    Linear { intercept: f64, slope: f64 },
    File(PathBuf),
}

fn real(raw: &str, spec: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::bad(format!("bad number {raw:?} in path spec {spec:?}")))
}

impl std::str::FromStr for PathSpec {
    type Err = CliError;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| CliError::bad(format!("path spec {spec:?} must be const:, linear: or file:")))?;
        match kind {
            "const" => Ok(PathSpec::Const(real(rest, spec)?)),
            "linear" => {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| CliError::bad(format!("linear spec {spec:?} needs A,B")))?;
                Ok(PathSpec::Linear { intercept: real(a, spec)?, slope: real(b, spec)? })
            }
            "file" if !rest.is_empty() => Ok(PathSpec::File(PathBuf::from(rest))),
            _ => Err(CliError::bad(format!("unknown path spec {spec:?}"))),
        }
    }
}

impl PathSpec {
    pub fn sample(&self, grid: TimeGrid) -> Result<SampledPath> {
        let path = match self {
            PathSpec::Const(v) => SampledPath::constant(grid, *v)?,
            PathSpec::Linear { intercept, slope } => SampledPath::from_fn(grid, |t| intercept + slope * t)?,
            PathSpec::File(p) => {
                let (times, values) = read_series(p)?;
                let vals = grid
                    .nodes()
                    .map(|t| interpolate(&times, &values, t))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| {
                        CliError::bad(format!("{} does not cover [{}, {}]", p.display(), grid.t0(), grid.end()))
                    })?;
                SampledPath::new(grid, vals)?
            }
        };
        Ok(path)
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> Option<f64> {
    let tol = 1e-9 * times.last()?.abs().max(1.0);
    if t < times[0] - tol || t > times[times.len() - 1] + tol {
        return None;
    }
    let j = times.partition_point(|x| *x <= t);
    if j == 0 {
        return Some(values[0]);
    }
    if j == times.len() {
        return Some(values[j - 1]);
    }
    let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
    Some(values[j - 1] + w * (values[j] - values[j - 1]))
}

/// Reads a two-column `time,value` CSV with strictly increasing times.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::MissingInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let name = path.display().to_string();
    let invalid = |line: u64, reason: String| CliError::Validation { file: name.clone(), line, reason };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| invalid(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(line, format!("column {} is not a finite number", i + 1)))
        };
        let (t, v) = (field(0)?, field(1)?);
        if times.last().is_some_and(|last| t <= *last) {
            return Err(invalid(line, "times must increase strictly".into()));
        }
        times.push(t);
        values.push(v);
    }
    if times.len() < 2 {
        return Err(invalid(1, "need at least two rows".into()));
    }
    Ok((times, values))
}
