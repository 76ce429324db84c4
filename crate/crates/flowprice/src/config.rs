//! Run configuration: a JSON file whose fields command-line flags override.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DATA_DIR_ENV: &str = "FLOWPRICE_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    Minutes,
}

impl TimeUnit {
    pub fn nanos(self) -> i64 {
        match self {
            TimeUnit::Seconds => 1_000_000_000,
            TimeUnit::Minutes => 60_000_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kappa: f64,
    pub phi: f64,
    #[serde(rename = "A")]
    pub terminal_penalty: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub e0: f64,
    pub p0: f64,
    pub steps: usize,
    pub alpha: f64,
    pub population: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kappa: 1.0,
            phi: 1.0,
            terminal_penalty: 0.0,
            sigma: 0.0,
            horizon: 1.0,
            e0: 0.0,
            p0: 100.0,
            steps: 1000,
            alpha: 0.0,
            population: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub stock: String,
    /// Day label used in reports; derived from `day_start` when absent.
    pub day: Option<String>,
    /// ISO-8601 or integer nanoseconds; the first book snapshot when absent.
    pub day_start: Option<String>,
    pub day_len_secs: u64,
    pub window_len_secs: u64,
    pub subinterval_secs: u64,
    pub time_unit: TimeUnit,
    pub adf_lags: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub format: Format,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: None,
            output_dir: PathBuf::from("out"),
            stock: "STOCK".into(),
            day: None,
            day_start: None,
            day_len_secs: 6 * 3600,
            window_len_secs: 1800,
            subinterval_secs: 10,
            time_unit: TimeUnit::Minutes,
            adf_lags: 0,
            seed: 0,
            jobs: None,
            format: Format::Csv,
            model: ModelConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::bad(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, overlaid by the file at `path` when given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn validate(&self) -> Result<()> {
        if self.day_len_secs == 0 || self.window_len_secs == 0 || self.subinterval_secs == 0 {
            return Err(CliError::bad("durations must be positive"));
        }
        if self.jobs == Some(0) {
            return Err(CliError::bad("jobs must be at least 1"));
        }
        Ok(())
    }

    /// The `--data-dir` flag, else the configured directory, else the environment.
    pub fn resolve_data_dir(&mut self, flag: Option<PathBuf>) {
        if let Some(d) = flag {
            self.data_dir = Some(d);
        } else if self.data_dir.is_none() {
            self.data_dir = std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        }
    }

    /// Default trade and book files of `stock` on `day` inside the data directory.
    pub fn dataset_files(&self, day: &str) -> Option<(PathBuf, PathBuf)> {
        let dir = self.data_dir.as_ref()?;
        let stem = format!("{}_{}", self.stock, day);
        Some((dir.join(format!("{stem}_trades.csv")), dir.join(format!("{stem}_book.csv"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_stable() {
        let mut cfg = RunConfig { day_start: Some("2014-11-03T15:00:00Z".into()), ..RunConfig::default() };
        cfg.model.terminal_penalty = 0.25;
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"adf_lags": 2, "model": {"A": 1}}"#).unwrap();
        assert_eq!(cfg.adf_lags, 2);
        assert_eq!(cfg.model.terminal_penalty, 1.0);
        assert_eq!(cfg.window_len_secs, 1800);
        assert!(serde_json::from_str::<RunConfig>(r#"{"windows": 3}"#).is_err());
    }

    #[test]
    fn explicit_data_dir_wins() {
        let mut cfg = RunConfig { data_dir: Some("cfg".into()), ..RunConfig::default() };
        cfg.resolve_data_dir(Some("flag".into()));
        assert_eq!(cfg.data_dir, Some(PathBuf::from("flag")));
        let mut cfg = RunConfig { data_dir: Some("cfg".into()), ..RunConfig::default() };
        cfg.resolve_data_dir(None);
        assert_eq!(cfg.data_dir, Some(PathBuf::from("cfg")));
    }
}
