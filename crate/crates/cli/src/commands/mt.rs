//! `slavkit mt translate` — few-shot MT over a backend: retrieve similar
//! dev-set examples per source sentence, render the tagged prompt, generate
//! and parse, optionally scoring against references.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use slavkit_core::fewshot::{build_fewshot_pool, translate_corpus_concurrent, MTDirection};

use crate::artifacts::{read_lines, RunContext};
use crate::commands::{jsonl_bytes, load_pairs_strict, rejects_path_for};
use crate::config::{BackendArgs, PipelineConfig, RoleComposite};
use crate::errors::CliError;

#[derive(Debug, Subcommand)]
pub enum MtCmd {
    /// Translate a file of sentences with similarity few-shot prompting
    Translate(TranslateArgs),
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Translation direction, e.g. de-hsb
    #[arg(long)]
    pub direction: MTDirection,
    /// Example pool of parallel pairs (the development set)
    #[arg(long)]
    pub pool: PathBuf,
    /// Source sentences to translate, one per line
    #[arg(long)]
    pub sources: PathBuf,
    /// Few-shot examples per sentence
    #[arg(long)]
    pub k: Option<usize>,
    /// Reference translations, one per line; enables ChrF++/BLEU reporting
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Output JSON-Lines of {idx, source, prompt_hash, translation, status}
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

pub fn run(cmd: &MtCmd, config: &PipelineConfig) -> Result<(), CliError> {
    let MtCmd::Translate(args) = cmd;
    let k = config.param_usize("k_fewshot", args.k, 5);
    let backend = RoleComposite::resolve(&args.backend, config)?;

    let mut ctx = RunContext::new("mt-translate");
    ctx.input(&args.pool)?;
    ctx.input(&args.sources)?;
    ctx.param("direction", args.direction.to_string());
    ctx.param("k", k);
    ctx.backends(backend.describe());

    let pool = load_pairs_strict(
        &args.pool,
        args.direction.source,
        args.direction.target,
        &rejects_path_for(&args.out),
    )?;
    let sources: Vec<String> = read_lines(&args.sources)?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .collect();
    let references = match &args.refs {
        Some(path) => {
            ctx.input(path)?;
            Some(read_lines(path)?)
        }
        None => None,
    };

    let index = build_fewshot_pool(&pool, &args.direction, &backend)?;
    let run = translate_corpus_concurrent(
        &sources,
        &index,
        k,
        &args.direction,
        &backend,
        references.as_deref(),
        config.workers(),
    )?;

    ctx.write_artifact(&args.out, &jsonl_bytes(&run.records))?;
    println!(
        "translated {} sentences ({} failed) -> {}",
        run.records.len(),
        run.failed,
        args.out.display()
    );
    if let Some(report) = &run.chrf_report {
        println!("{report}");
    }
    if let Some(report) = &run.bleu_report {
        println!("{report}");
    }
    Ok(())
}
