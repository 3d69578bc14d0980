//! Command-line entry point wiring the pipeline end to end: ingestion,
//! similarity data selection, dataset assembly, RAG indexing, few-shot MT,
//! permutation-averaged QA evaluation, corpus scoring and backend checks.
//!
//! Exit codes: 0 success, 1 usage, 2 data validation, 3 backend failure,
//! 4 internal.

mod artifacts;
mod commands;
mod config;
mod errors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{assemble, check, ingest, mt, qa, rag, score, select};
use config::PipelineConfig;
use errors::CliError;

#[derive(Debug, Parser)]
#[command(name = "slavkit", version, about = "Limited-resource Slavic MT + QA pipeline toolkit")]
struct Cli {
    /// JSON config file; command-line flags override config values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and canonicalize raw corpora (tolerates rejects)
    Ingest(ingest::IngestArgs),
    /// Similarity-based training-data selection
    SelectData(select::SelectArgs),
    /// Build finetuning datasets and job specs
    #[command(subcommand)]
    Assemble(assemble::AssembleCmd),
    /// Build and query subject-routed chunk indexes
    #[command(subcommand)]
    Rag(rag::RagCmd),
    /// Few-shot machine translation
    #[command(subcommand)]
    Mt(mt::MtCmd),
    /// Multiple-choice QA evaluation
    #[command(subcommand)]
    Qa(qa::QaCmd),
    /// Corpus metrics over line files
    Score(score::ScoreArgs),
    /// Exercise a backend's three facilities
    BackendCheck(check::CheckArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = PipelineConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(args) => ingest::run(args, &config),
        Command::SelectData(args) => select::run(args, &config),
        Command::Assemble(cmd) => assemble::run(cmd, &config),
        Command::Rag(cmd) => rag::run(cmd, &config),
        Command::Mt(cmd) => mt::run(cmd, &config),
        Command::Qa(cmd) => qa::run(cmd, &config),
        Command::Score(args) => score::run(args, &config),
        Command::BackendCheck(args) => check::run(args, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors; everything else is usage (exit 1)
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
