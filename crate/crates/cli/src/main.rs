//! `evseq`: synthesize data, train encoders, evaluate them, export
//! embeddings, check gradients and run the λ sweep.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "evseq", version, about = "Self-supervised encoders for transaction event sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `objective.lambda=0.1` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic dataset as events, labels and vocabulary files.
    Synth,
    /// Train an encoder; writes a checkpoint and a per-epoch NDJSON log.
    Train {
        /// Continue from this checkpoint instead of initializing.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Resume even if the checkpoint came from a different config.
        #[arg(long)]
        force: bool,
    },
    /// Score a trained encoder on the global and local tasks.
    Eval {
        /// Checkpoint to evaluate; defaults to the one `train` writes for this config.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export sequence embeddings as CSV.
    Embed {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Finite-difference check of all training gradients.
    Gradcheck,
    /// Train and evaluate every method and hybrid weight over the eval seeds.
    Sweep,
    /// Print the JSON Schema of the run config.
    Schema,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Command::Schema = cli.command {
        print!("{}", config::SCHEMA);
        return ExitCode::SUCCESS;
    }
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = commands::Context { cfg, out: cli.out };
    let result = match cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Train { resume, force } => commands::train(&ctx, resume.as_deref(), force),
        Command::Eval { checkpoint } => commands::eval(&ctx, checkpoint.as_deref()),
        Command::Embed { checkpoint } => commands::embed(&ctx, checkpoint.as_deref()),
        Command::Gradcheck => commands::gradcheck(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Schema => unreachable!("handled before config load"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config = e.downcast_ref::<ConfigError>().is_some()
                || matches!(e.downcast_ref::<evseq::Error>(), Some(evseq::Error::Config(_)));
            eprintln!("error: {e:#}");
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
