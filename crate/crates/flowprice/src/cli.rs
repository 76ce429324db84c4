//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Format, ModelConfig, RunConfig, TimeUnit};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "flowprice", version, about = "Price formation from order flow")]
pub struct Cli {
    /// JSON run configuration; flags take precedence over its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form models.
    Model {
        #[command(subcommand)]
        which: ModelCommand,
    },
    /// Fit the price-formation regressions to one trading day.
    Analyze(AnalyzeArgs),
    /// Monte Carlo simulation of the trader population.
    Simulate(SimulateArgs),
    /// Aggregate fit files of several days into one report.
    Report(ReportArgs),
    /// Write a synthetic trading day with known impact coefficients.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Terminal inventory penalty.
    #[arg(long = "A", allow_negative_numbers = true)]
    pub terminal_penalty: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Horizon.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// Initial mean inventory.
    #[arg(long, allow_negative_numbers = true)]
    pub e0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p0: Option<f64>,
    /// Number of time steps on [0, T].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Permanent impact slope of the finite population.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Population size.
    #[arg(long = "n")]
    pub population: Option<usize>,
}

impl ModelFlags {
    pub fn apply(&self, m: &mut ModelConfig) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut m.kappa, self.kappa);
        set(&mut m.phi, self.phi);
        set(&mut m.terminal_penalty, self.terminal_penalty);
        set(&mut m.sigma, self.sigma);
        set(&mut m.horizon, self.horizon);
        set(&mut m.e0, self.e0);
        set(&mut m.p0, self.p0);
        set(&mut m.alpha, self.alpha);
        if let Some(s) = self.steps {
            m.steps = s;
        }
        if let Some(n) = self.population {
            m.population = n;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputFlags {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Value-function coefficients θ0, θ1, θ2 for a price path.
    Theta {
        #[command(flatten)]
        model: ModelFlags,
        /// Price path spec; constant p0 when absent.
        #[arg(long)]
        price: Option<String>,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Formed price of an order flow.
    Price {
        #[command(flatten)]
        model: ModelFlags,
        /// Order-flow path spec.
        #[arg(long)]
        lambda: String,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Order flow induced by a price path, or the constant-price flow from --lambda0.
    Flow {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, conflicts_with = "lambda0")]
        price: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        lambda0: Option<f64>,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Expected finite-population price and its decomposition.
    Finprice {
        #[command(flatten)]
        model: ModelFlags,
        /// Expected order flow; the mean-inventory solution's flow when absent.
        #[arg(long)]
        lambda: Option<String>,
        /// `alpha-over-n`, or a path spec for a time-only kernel.
        #[arg(long, default_value = "alpha-over-n")]
        kernel: String,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Gap to the mean-field price as the population grows.
    Converge {
        #[command(flatten)]
        model: ModelFlags,
        /// Comma-separated population sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        #[arg(long, default_value = "const:1")]
        lambda: String,
        #[command(flatten)]
        output: OutputFlags,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub trades: Option<PathBuf>,
    #[arg(long)]
    pub book: Option<PathBuf>,
    /// Directory holding `<stock>_<day>_trades.csv` and `<stock>_<day>_book.csv`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub stock: Option<String>,
    #[arg(long)]
    pub day: Option<String>,
    /// Start of the first window (ISO-8601 or nanoseconds).
    #[arg(long)]
    pub day_start: Option<String>,
    #[arg(long)]
    pub day_len_secs: Option<u64>,
    #[arg(long)]
    pub window_len_secs: Option<u64>,
    #[arg(long)]
    pub subinterval_secs: Option<u64>,
    #[arg(long, value_enum)]
    pub time_unit: Option<TimeUnit>,
    #[arg(long)]
    pub adf_lags: Option<usize>,
    /// Worker threads; all logical CPUs when absent.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Count and skip malformed rows instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
    /// Also write tidy per-point CSVs for plotting.
    #[arg(long)]
    pub emit_plotdata: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    /// `zero`, `optimal`, or a path spec giving an open-loop rate.
    #[arg(long, default_value = "optimal")]
    pub policy: String,
    /// Initial inventory: a number, `normal:MEAN,STD` or `uniform:LOW,HIGH`.
    #[arg(long, allow_negative_numbers = true)]
    pub q0: Option<String>,
    /// Price path spec; constant p0 when absent.
    #[arg(long)]
    pub price: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also run the Nash-optimality check of the finite population.
    #[arg(long)]
    pub gateaux: bool,
    /// Check the symmetric equilibrium instead of the idle candidate.
    #[arg(long, requires = "gateaux")]
    pub equilibrium: bool,
    /// Write raw paths as little-endian f64 with a JSON sidecar.
    #[arg(long)]
    pub ensemble_bin: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// `fits.json` files written by `analyze`.
    #[arg(long, num_args = 1.., required = true)]
    pub fits: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "SYN")]
    pub stock: String,
    #[arg(long, default_value = "2021-03-01T14:30:00Z")]
    pub day_start: String,
    /// Write ISO-8601 timestamps instead of nanoseconds.
    #[arg(long)]
    pub iso: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub e0: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Model { which } => crate::commands::model::run(cfg, which),
        Command::Analyze(a) => crate::commands::analyze::run(cfg, a),
        Command::Simulate(a) => crate::commands::simulate::run(cfg, a),
        Command::Report(a) => crate::commands::analyze::report(a),
        Command::Synth(a) => crate::commands::analyze::synth(cfg, a),
    }
}
