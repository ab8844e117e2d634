//! `doakit`: simulate scenes, run localizer/tracker pipelines, evaluate
//! submissions and aggregate reports.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod config;
mod evaluate;
mod output;
mod report;
mod run;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use doakit::pipeline::LocalizerKind;
use doakit::simulate::NoiseKind;
use doakit::track::TrackerKind;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        Self::Data(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "doakit",
    version,
    about = "Acoustic source localization and tracking benchmark toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a free-field scene and write it as a recording directory.
    Simulate(SimulateArgs),
    /// Localize and track a recording and write a submission table.
    Run(RunArgs),
    /// Score submissions against recordings with ground truth.
    Evaluate(EvaluateArgs),
    /// Tabulate and average metrics written by `evaluate`.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// TOML configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    task: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Array preset name.
    #[arg(long)]
    array: Option<String>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Per-source SNR in dB.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    noise: Option<NoiseKind>,
    /// Recording id stored in the metadata; defaults to `task<T>-seed<S>`.
    #[arg(long)]
    id: Option<String>,
    /// Output recording directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recording directory.
    #[arg(long)]
    input: PathBuf,
    /// Corpus schema TOML replacing the built-in table layout.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    localizer: Option<LocalizerKind>,
    #[arg(long)]
    n_sources: Option<usize>,
    #[arg(long)]
    tracker: Option<TrackerKind>,
    /// Tracker seed (particle filter).
    #[arg(long)]
    seed: Option<u64>,
    /// Grid spacing in degrees.
    #[arg(long)]
    grid_resolution: Option<f64>,
    /// Submission table to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recording directory with ground truth; repeat for batches.
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    /// Submission table, paired with `--truth` in order.
    #[arg(long, required = true)]
    submission: Vec<PathBuf>,
    /// Corpus schema TOML replacing the built-in table layout.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Association gate in degrees.
    #[arg(long)]
    gate: Option<f64>,
    /// OSPA orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    ospa_p: Option<Vec<f64>>,
    /// OSPA cutoff in degrees.
    #[arg(long)]
    ospa_c: Option<f64>,
    #[arg(long)]
    pd_per_source: bool,
    #[arg(long)]
    align_vaps: bool,
    /// Also write the per-timestamp OSPA series.
    #[arg(long)]
    ospa_series: bool,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `metrics.json` files or directories holding them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// CSV with one row per recording and a closing mean row.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate::cmd_simulate(&a),
        Command::Run(a) => run::cmd_run(&a),
        Command::Evaluate(a) => evaluate::cmd_evaluate(&a),
        Command::Report(a) => report::cmd_report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nSee 'doakit --help' for usage.");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
