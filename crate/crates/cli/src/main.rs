use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::ConfigArgs;

/// Stability and generalization-gap experiments for single-layer
/// hypergraph collaborative networks.
#[derive(Debug, Parser)]
#[command(name = "hcon", version)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "HCON_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the stability constants and bounds for a configuration.
    Bounds,
    /// Train once on the first split and report train/test loss.
    Train,
    /// Paired runs on S and S': empirical stability against kappa/n.
    Stability,
    /// Generalization gap over train fractions and the alpha/eta grids.
    GapSweep,
    /// Per-epoch train and test loss.
    Epochs,
    /// Epoch traces with the normalized and the raw incidence matrix.
    NormCompare,
    /// Write a planted-partition dataset.
    Synth {
        /// Output file (default: <out-dir>/planted.hgd.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a co-citation dataset from `.content` and `.cites` files.
    Ingest {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        /// Class mapped to label 1; every other class maps to 0.
        #[arg(long)]
        positive_class: String,
        /// Fail on documents in no hyperedge instead of dropping them.
        #[arg(long)]
        keep_isolated: bool,
        #[arg(long, default_value = "cocitation")]
        name: String,
        /// Output file (default: <out-dir>/<name>.hgd.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the invariant suite; exit 0 iff every check passes.
    Verify {
        /// Multiply g_max by this factor before checking (fault injection).
        #[arg(long, hide = true)]
        fault_g_max_scale: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
    match commands::run(&cli) {
        Ok(commands::Status::Clean) => ExitCode::SUCCESS,
        Ok(commands::Status::Warnings) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
