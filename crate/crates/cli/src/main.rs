//! `pesco` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Zero-shot text classification with prompt-enhanced embedding matching.
#[derive(Debug, Parser)]
#[command(name = "pesco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Zero-shot predictions, one `doc_id<TAB>class<TAB>confidence` line per document.
    Predict {
        #[arg(long)]
        config: PathBuf,
        /// Reference encoder checkpoint; required unless --remote is given.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `host:port` of a line-protocol embedding service.
        #[arg(long)]
        remote: Option<String>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Self-train the reference encoder; writes round reports, a checkpoint and an evaluation.
    Selftrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a prediction file against a labelled dataset.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Dataset settings for the gold file (format, columns, descriptions).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic dataset in the CSV format.
    GenSynth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print checkpoint header fields.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Predict {
            config,
            checkpoint,
            remote,
            input,
            out,
        } => commands::predict(&config, checkpoint.as_deref(), remote.as_deref(), &input, &out),
        Command::Selftrain { config, out_dir } => commands::selftrain(&config, &out_dir),
        Command::Eval { pred, gold, config } => commands::eval(&pred, &gold, config.as_deref()),
        Command::GenSynth { config, out_dir } => commands::gen_synth(&config, &out_dir),
        Command::Inspect { checkpoint } => commands::inspect(&checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pesco: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
