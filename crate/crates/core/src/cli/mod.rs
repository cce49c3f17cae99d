//! Command-line front end: argument parsing, settings resolution and JSON
//! reports. The binary is a thin wrapper around [`main_with_args`].

mod commands;
mod settings;

pub use commands::{
    cmd_bench_transfer, cmd_compare_partitioning, cmd_generate, cmd_train,
    compare_partitioning_graph, model_graph, prepare_input, timeline_deltas, train_graph, BenchRow,
    BenchTransferReport, ComparePartitioningReport, DataSummary, PreparedInput, RunReport, Timings,
    TransferSummary,
};
pub use settings::{FileConfig, GenerateSettings, TrainSettings};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dist::Scheduler;
use crate::error::{Error, Result};
use crate::models::Architecture;

/// Version tag carried by every report.
pub const REPORT_SCHEMA: &str = "dyngnn.run-report/v1";

#[derive(Debug, Parser)]
#[command(
    name = "dyngnn",
    version,
    about = "Dynamic graph neural network training engine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random dynamic graph as an edge list.
    Generate(GenerateArgs),
    /// Train a link-prediction model with simulated workers.
    Train(TrainArgs),
    /// Compare full and graph-difference snapshot transfer per worker count.
    BenchTransfer(BenchArgs),
    /// Compare snapshot and vertex partitioning communication volume.
    ComparePartitioning(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub timesteps: usize,
    #[arg(long)]
    pub vertices: usize,
    /// Edges per snapshot are round(N * density).
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by every command that reads a graph and builds a model.
#[derive(Debug, Args, Default, Clone)]
pub struct ModelArgs {
    /// Edge-list file.
    #[arg(long)]
    pub data: PathBuf,
    /// tm-gcn, cd-gcn or egcn-o.
    #[arg(long)]
    pub model: Option<Architecture>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub edge_life: Option<usize>,
    /// Hidden and embedding feature length.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// TOML file with defaults for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Fraction of each snapshot's edges sampled as positives.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// round-robin or concurrent.
    #[arg(long)]
    pub scheduler: Option<Scheduler>,
    /// Write the trained parameters in the binary parameter format.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub workers: Vec<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Write the delta stream of the whole timeline (starting from an
    /// empty snapshot) in the binary delta format.
    #[arg(long)]
    pub dump_deltas: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub workers: Vec<usize>,
}

/// Writes `report` as pretty JSON to `path`, or to stdout.
pub fn emit_report<T: Serialize>(report: &T, path: Option<&PathBuf>) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&GenerateSettings::from_args(&a)).map(|_| ()),
        Command::Train(a) => {
            let settings = TrainSettings::resolve(&a)?;
            let report = cmd_train(&settings, &a.model.data, a.params_out.as_deref())?;
            emit_report(&report, a.model.report.as_ref())
        }
        Command::BenchTransfer(a) => {
            let report = cmd_bench_transfer(&a)?;
            emit_report(&report, a.model.report.as_ref())
        }
        Command::ComparePartitioning(a) => {
            let report = cmd_compare_partitioning(&a)?;
            emit_report(&report, a.model.report.as_ref())
        }
    }
}

/// Exit status for an outcome: 0 on success, 2 for configuration errors,
/// 1 for failures while running.
pub fn exit_code(outcome: &Result<()>) -> i32 {
    match outcome {
        Ok(()) => 0,
        Err(e) if e.is_config() => 2,
        Err(_) => 1,
    }
}

/// Parses `args` (program name first), runs the command, reports any error
/// on stderr and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = run(cli);
    if let Err(e) = &outcome {
        eprintln!("dyngnn: {e}");
    }
    exit_code(&outcome)
}
