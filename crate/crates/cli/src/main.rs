mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rtsfnet", version, about = "Rotation and time-series-feature network for IMU activity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
pub struct Common {
    /// Threads used for gradient and evaluation passes (results do not depend on it).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw benchmark, segment it and write split stores.
    Prepare {
        #[arg(long)]
        dataset: String,
        /// Directory holding the raw dataset files.
        #[arg(long, env = "RTSFNET_DATA_ROOT")]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep raw sensor units instead of standardizing with training statistics.
        #[arg(long)]
        raw: bool,
    },
    /// Train a model on a prepared dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `prepare`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the configuration file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `train.max_epochs`.
        #[arg(long)]
        max_epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Dump block features of prepared segments as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        /// Block length, optionally followed by `/overlap` (e.g. `32/16`).
        #[arg(long)]
        blockspec: String,
        /// Feature lines separated by `,` or `;` (e.g. `1,2,45 lag=2`); defaults to the selected set.
        #[arg(long)]
        features: Option<String>,
        #[arg(long, default_value = "train")]
        split: String,
        /// Only the first N segments.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients of a small model with central differences.
    Gradcheck {
        /// Model configuration (a run config TOML); the built-in tiny model when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Check every k-th parameter only.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Summarize a training or evaluation output directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

/// An error with the stable code printed before its message.
pub struct Failure {
    pub code: &'static str,
    pub message: String,
}

impl From<rtsfnet::Error> for Failure {
    fn from(e: rtsfnet::Error) -> Self {
        Failure {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

pub type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().collect();
    let res = match cli.command {
        Command::Prepare { dataset, root, out, raw } => commands::prepare(&args, &dataset, &root, &out, raw),
        Command::Train {
            config,
            data,
            out,
            seed,
            max_epochs,
            common,
        } => commands::train(&args, &config, &data, &out, seed, max_epochs, common),
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
            common,
        } => commands::eval(&args, &checkpoint, &data, &split, &out, common),
        Command::Features {
            data,
            blockspec,
            features,
            split,
            limit,
            out,
        } => commands::features(&args, &data, &blockspec, features.as_deref(), &split, limit, &out),
        Command::Gradcheck {
            config,
            seed,
            batch,
            eps,
            stride,
        } => commands::gradcheck(config.as_deref(), seed, batch, eps, stride),
        Command::Report { run } => commands::report(&run),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}] {}", f.code, f.message);
            ExitCode::FAILURE
        }
    }
}
