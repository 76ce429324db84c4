//! Atomic file output and small CSV helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use flowprice_core::SampledPath;
use serde::Serialize;

use crate::error::Result;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// In-memory CSV table.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("write to memory");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("write to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flush to memory")
    }
}

/// Shortest representation that parses back to the same `f64`. Whole
/// numbers print without a fraction; tiny or huge ones with an exponent.
pub fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Two-column `time,value` CSV.
pub fn path_csv(path: &SampledPath, value_name: &str) -> Vec<u8> {
    columns_csv(path.grid().nodes(), &[(value_name, path.values())])
}

pub fn columns_csv(times: impl Iterator<Item = f64>, cols: &[(&str, &[f64])]) -> Vec<u8> {
    let mut t = Table::new(std::iter::once("time").chain(cols.iter().map(|c| c.0)));
    for (k, time) in times.enumerate() {
        t.row(std::iter::once(num(time)).chain(cols.iter().map(|c| num(c.1[k]))));
    }
    t.into_bytes()
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}
