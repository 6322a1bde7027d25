//! `mergedse` command-line driver.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "mergedse", version, about = "Function merging and HW/SW partitioning design-space exploration")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Config file with `key = value` lines
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Area budget in LUTs
    #[arg(long, global = true, value_name = "LUTS", allow_hyphen_values = true)]
    pub budget: Option<String>,
    /// Interconnect latency in cycles per hardware call
    #[arg(long, global = true, value_name = "CYCLES", allow_hyphen_values = true)]
    pub latency: Option<String>,
    /// Interconnect bandwidth in bytes/s, or `inf`
    #[arg(long, global = true, value_name = "BYTES_PER_S", allow_hyphen_values = true)]
    pub bandwidth: Option<String>,
    /// Clock period in seconds per cycle
    #[arg(long, global = true, value_name = "SECONDS", allow_hyphen_values = true)]
    pub clock: Option<String>,
    /// FE, FLE, FE+Merging, FLE+Merging or sweep
    #[arg(long, global = true, value_name = "MODE")]
    pub mode: Option<String>,
    /// Area model file (default: bundled MLP); for `train`, the kind to fit
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Seed for every random choice
    #[arg(long, global = true, value_name = "N", allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output file or directory (default: standard output)
    #[arg(short = 'o', long = "output", global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Functions, call graph, loops, merge candidates and profile of a program
    Analyze {
        program: PathBuf,
        /// Heap images to profile with
        inputs: Option<PathBuf>,
        /// Only the call graph (combine with --loops; neither prints everything)
        #[arg(long)]
        callgraph: bool,
        /// Only the loop forests
        #[arg(long)]
        loops: bool,
        /// Ranked pairs to list
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Extract outermost loops into functions and print the module
    Transform {
        program: PathBuf,
        /// Outline outermost loops (the only transform, on by default)
        #[arg(long, default_value_t = true)]
        extract_loops: bool,
    },
    /// Merge function pairs and print the module with the merged functions appended
    Merge {
        program: PathBuf,
        /// Pair to merge, as `first,second`
        #[arg(long, value_name = "F1,F2", conflicts_with = "all")]
        pair: Option<String>,
        /// Merge every ranked pair at or above --min-similarity
        #[arg(long)]
        all: bool,
        /// Similarity cutoff for --all
        #[arg(long, default_value_t = 0.3, value_name = "S")]
        min_similarity: f64,
        /// Linearizations tried per side
        #[arg(long, default_value_t = 4)]
        seeds: u64,
        /// Check each merged function on random inputs
        #[arg(long)]
        verify: bool,
        /// Random inputs per side for --verify
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Per-pair CSV (default: next to -o with a .csv extension, else standard error)
        #[arg(long, value_name = "CSV")]
        csv: Option<PathBuf>,
    },
    /// Train an area model on the synthetic dataset; `--model` names the kind (lasso or mlp)
    Train {
        /// Dataset size
        #[arg(long, default_value_t = 600)]
        samples: usize,
        /// Train on this CSV instead of generating data
        #[arg(long, value_name = "CSV")]
        data: Option<PathBuf>,
        /// Also write the generated dataset here
        #[arg(long, value_name = "CSV")]
        dump_data: Option<PathBuf>,
    },
    /// Compare LASSO and MLP at 200 and 600 samples, or score `--model` on a test set
    Eval {
        /// Largest dataset size; the smaller run uses a third of it
        #[arg(long, default_value_t = 600)]
        samples: usize,
        /// Test set CSV for `--model` (default: held-out synthetic samples)
        #[arg(long, value_name = "CSV")]
        test: Option<PathBuf>,
    },
    /// Partition one program for one configuration
    Partition { program: PathBuf, inputs: PathBuf },
    /// Full pipeline for all four configurations, writing a JSON report
    Dse { program: PathBuf, inputs: PathBuf },
    /// Sweep budgets, latencies and bandwidths, writing CSV
    Sweep { program: PathBuf, inputs: PathBuf },
    /// Differential check of a merged function, or validation of a report
    Verify {
        /// Program holding both parents and the merged function
        program: Option<PathBuf>,
        first: Option<String>,
        second: Option<String>,
        merged: Option<String>,
        /// Random inputs per side
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Validate this JSON report instead
        #[arg(long, value_name = "JSON")]
        report: Option<PathBuf>,
    },
}

pub fn command() -> clap::Command {
    Cli::command()
}

fn init_logging() {
    let level = std::env::var("MERGEDSE_LOG").unwrap_or_else(|_| "error".into());
    let filter = match level.as_str() {
        "error" | "info" | "debug" => level,
        _ => "error".into(),
    };
    let _ = env_logger::Builder::new().parse_filters(&filter).format_timestamp(None).try_init();
}

pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("mergedse: {e}");
            ExitCode::from(e.exit_code())
        }
        // the panic message is already on stderr
        Err(_) => ExitCode::from(3),
    }
}
