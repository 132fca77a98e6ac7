//! Command-line experiment runner.

pub mod commands;
pub mod config;
pub mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::distances::Metric;
use crate::error::{Error, Result};
use commands::Overrides;
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "longrange",
    version,
    about = "Range of graph learning tasks and models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph ranges of analytic tasks over graphs, tasks, k and seeds.
    TaskRange(RunArgs),
    /// Train models and track their range per epoch.
    TrainRange(RunArgs),
    /// Exact range reports with closed-form comparisons.
    Exact(RunArgs),
    /// Sampled versus exact model range.
    Estimate(RunArgs),
    /// Write edge lists and distance matrices.
    GenGraph(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    Spd,
    Res,
    Both,
}

impl MetricChoice {
    fn metrics(self) -> Vec<Metric> {
        match self {
            MetricChoice::Spd => vec![Metric::Spd],
            MetricChoice::Res => vec![Metric::Resistance],
            MetricChoice::Both => vec![Metric::Spd, Metric::Resistance],
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in config by name.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seeds (overrides the config).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Distance metrics (overrides the config).
    #[arg(long, value_enum)]
    pub metric: Option<MetricChoice>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => presets::preset(name)?,
            (None, None) => {
                return Err(Error::Config(
                    "either --config or --preset is required".into(),
                ))
            }
        };
        Overrides {
            out_dir: self.out.clone(),
            seeds: self.seeds.clone(),
            metrics: self.metric.map(MetricChoice::metrics),
        }
        .apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        match err {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TaskRange(a) => commands::cmd_task_range(&a.resolve()?).map(|_| ()),
        Command::TrainRange(a) => commands::cmd_train_range(&a.resolve()?).map(|_| ()),
        Command::Exact(a) => commands::cmd_exact(&a.resolve()?).map(|_| ()),
        Command::Estimate(a) => commands::cmd_estimate(&a.resolve()?).map(|_| ()),
        Command::GenGraph(a) => commands::cmd_gen_graph(&a.resolve()?).map(|_| ()),
    }
}

pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
