//! `slavkit ingest` — validate and canonicalize raw corpora. Unlike the
//! downstream commands, ingest tolerates rejects: noisy corpora are the
//! whole point, so invalid lines land in the report and the command
//! succeeds.

use std::path::PathBuf;

use clap::Args;

use slavkit_core::corpus::{self, LangTag};
use slavkit_core::mcq::{relabel, LabelScheme};

use crate::artifacts::RunContext;
use crate::commands::{jsonl_bytes, pairs_bytes, rejects_path_for};
use crate::config::PipelineConfig;
use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Parallel corpus file (TSV `source<TAB>target` or JSON-Lines {src,tgt})
    #[arg(long, conflicts_with = "mcq")]
    pub parallel: Option<PathBuf>,
    /// MCQ dataset file (JSON-Lines)
    #[arg(long, required_unless_present = "parallel")]
    pub mcq: Option<PathBuf>,
    /// Source language of --parallel
    #[arg(long)]
    pub src: Option<LangTag>,
    /// Target language of --parallel
    #[arg(long)]
    pub tgt: Option<LangTag>,
    /// Drop duplicate (source, target) pairs, keeping first occurrences
    #[arg(long)]
    pub dedup: bool,
    /// Relabel MCQ options with this scheme while ingesting
    #[arg(long)]
    pub label_scheme: Option<LabelScheme>,
    /// Output file (.tsv or .jsonl for pairs, .jsonl for MCQ)
    #[arg(long)]
    pub out: PathBuf,
    /// Rejection report path (default: <out>.rejects.jsonl)
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

pub fn run(args: &IngestArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let _ = config;
    let rejects_path = args.rejects.clone().unwrap_or_else(|| rejects_path_for(&args.out));
    let mut ctx = RunContext::new("ingest");

    if let Some(parallel) = &args.parallel {
        let src = args
            .src
            .ok_or_else(|| CliError::Usage("--parallel requires --src".into()))?;
        let tgt = args
            .tgt
            .ok_or_else(|| CliError::Usage("--parallel requires --tgt".into()))?;
        ctx.input(parallel)?;
        ctx.param("src", src.code());
        ctx.param("tgt", tgt.code());
        ctx.param("dedup", args.dedup);

        let outcome = corpus::load_parallel(parallel, src, tgt)?;
        let n_rejects = outcome.rejects.len();
        outcome.write_rejects(&rejects_path)?;
        let mut pairs = outcome.records;
        let loaded = pairs.len();
        if args.dedup {
            pairs = corpus::dedup_pairs(pairs);
        }
        ctx.write_artifact(&args.out, &pairs_bytes(&pairs, &args.out))?;
        println!(
            "ingested {} pairs ({} after dedup), {} rejected",
            loaded,
            pairs.len(),
            n_rejects
        );
        if n_rejects > 0 {
            println!("rejection report: {}", rejects_path.display());
        }
        return Ok(());
    }

    let mcq_path = args
        .mcq
        .as_ref()
        .ok_or_else(|| CliError::Usage("pass --parallel or --mcq".into()))?;
    ctx.input(mcq_path)?;
    let outcome = corpus::load_mcq(mcq_path)?;
    let n_rejects = outcome.rejects.len();
    outcome.write_rejects(&rejects_path)?;
    let items: Vec<_> = match args.label_scheme {
        Some(scheme) => {
            ctx.param("label_scheme", format!("{scheme:?}").to_lowercase());
            outcome
                .records
                .iter()
                .map(|i| relabel(i, scheme))
                .collect::<Result<_, _>>()?
        }
        None => outcome.records,
    };
    ctx.write_artifact(&args.out, &jsonl_bytes(&items))?;
    println!("ingested {} items, {} rejected", items.len(), n_rejects);
    if n_rejects > 0 {
        println!("rejection report: {}", rejects_path.display());
    }
    Ok(())
}
