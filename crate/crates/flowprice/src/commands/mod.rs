pub mod analyze;
pub mod model;
pub mod simulate;

use serde_json::{Map, Value};

use crate::cli::OutputFlags;
use crate::config::{Format, RunConfig};
use crate::error::Result;
use crate::io::{columns_csv, emit};

/// Writes named columns against `times` as CSV or as a JSON object of arrays.
pub(crate) fn emit_columns(cfg: &RunConfig, out: &OutputFlags, times: &[f64], cols: &[(&str, &[f64])]) -> Result<()> {
    let bytes = match out.format.unwrap_or(cfg.format) {
        Format::Csv => columns_csv(times.iter().copied(), cols),
        Format::Json => {
            let mut obj = Map::new();
            obj.insert("time".into(), Value::from(times.to_vec()));
            for (name, vals) in cols {
                obj.insert((*name).into(), Value::from(vals.to_vec()));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(obj)).map_err(std::io::Error::other)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    emit(out.out.as_deref(), &bytes)
}
