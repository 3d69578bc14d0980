//! `slavkit select-data` — similarity-based training-data selection: for
//! each reference target sentence, keep the k nearest pool pairs by
//! target-side embedding, deduplicated.

use std::path::PathBuf;

use clap::Args;

use slavkit_core::backend::Backend;
use slavkit_core::corpus::LangTag;
use slavkit_core::retrieval::{
    select_training_pairs, select_training_pairs_resumable, CachingBackend,
};

use crate::artifacts::{read_lines, RunContext};
use crate::commands::{load_pairs_strict, pairs_bytes, rejects_path_for};
use crate::config::{open_concurrent, resolve_descriptor, BackendArgs, PipelineConfig, Role};
use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Reference sentences: plain text (one per line) or a pair file
    /// (.tsv/.jsonl, target side used)
    #[arg(long)]
    pub refs: PathBuf,
    /// Candidate pool of parallel pairs (TSV or JSON-Lines)
    #[arg(long)]
    pub pool: PathBuf,
    /// Source language of the pool
    #[arg(long)]
    pub src: LangTag,
    /// Target language of the pool (the retrieval side)
    #[arg(long)]
    pub tgt: LangTag,
    /// Neighbors per reference sentence
    #[arg(long)]
    pub k: Option<usize>,
    /// Output file for the selected pairs (.tsv or .jsonl)
    #[arg(long)]
    pub out: PathBuf,
    /// Resumable state file for long runs
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Checkpoint interval in references (with --state)
    #[arg(long, default_value_t = 1000)]
    pub checkpoint_every: usize,
    /// On-disk embedding cache keyed by backend name and text hash
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

const DEFAULT_K_SELECT: usize = 75;

pub fn run(args: &SelectArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let k = config.param_usize("k_select", args.k, DEFAULT_K_SELECT);
    let descriptor = resolve_descriptor(&args.backend, config, Role::Embedder)?;
    let backend = open_concurrent(&descriptor, config)?;

    let mut ctx = RunContext::new("select-data");
    ctx.input(&args.refs)?;
    ctx.input(&args.pool)?;
    ctx.param("k", k);
    ctx.param("src", args.src.code());
    ctx.param("tgt", args.tgt.code());
    ctx.backends(vec![format!(
        "embedder={} dims={}",
        descriptor.name, descriptor.embedding_dims
    )]);

    let references: Vec<String> = if args
        .refs
        .extension()
        .is_some_and(|e| e == "tsv" || e == "jsonl")
    {
        load_pairs_strict(&args.refs, args.src, args.tgt, &rejects_path_for(&args.out))?
            .into_iter()
            .map(|p| p.target_text)
            .collect()
    } else {
        read_lines(&args.refs)?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect()
    };
    let pool = load_pairs_strict(&args.pool, args.src, args.tgt, &rejects_path_for(&args.out))?;

    let caching = match &args.cache {
        Some(path) => Some(CachingBackend::open(backend.clone(), path)?),
        None => None,
    };
    let effective: &dyn Backend = match &caching {
        Some(c) => c,
        None => backend.as_ref(),
    };

    let selected = match &args.state {
        Some(state) => select_training_pairs_resumable(
            &references,
            &pool,
            k,
            effective,
            state,
            args.checkpoint_every,
        )?,
        None => select_training_pairs(&references, &pool, k, effective)?,
    };
    if let Some(c) = &caching {
        c.save()?;
    }

    ctx.write_artifact(&args.out, &pairs_bytes(&selected, &args.out))?;
    println!(
        "selected {} unique pairs from {} references x k={} over a {}-pair pool",
        selected.len(),
        references.len(),
        k,
        pool.len()
    );
    Ok(())
}
