//! `slavkit qa eval` — permutation-averaged multiple-choice evaluation, with
//! optional retrieval-augmented context injection before scoring.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use slavkit_core::backend::Backend;
use slavkit_core::corpus::{LangTag, McqItem};
use slavkit_core::mcq::{evaluate_mcq_concurrent, relabel, LabelScheme};
use slavkit_core::rag::retrieve_context;

use crate::artifacts::RunContext;
use crate::commands::{jsonl_bytes, load_mcq_strict, parse_langs, rejects_path_for};
use crate::commands::rag::load_subject_indexes;
use crate::config::{BackendArgs, PipelineConfig, RoleComposite};
use crate::errors::CliError;

#[derive(Debug, Subcommand)]
pub enum QaCmd {
    /// Score a multiple-choice dataset and report accuracy
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// MCQ items (JSON-Lines)
    #[arg(long)]
    pub items: PathBuf,
    /// Languages rendered into the prompt, comma-separated
    #[arg(long, default_value = "en")]
    pub langs: String,
    /// Maximum sampled answer orders per item
    #[arg(long)]
    pub max_orders: Option<usize>,
    /// Seed for answer-order sampling
    #[arg(long)]
    pub orders_seed: Option<u64>,
    /// Option label scheme
    #[arg(long, default_value = "alphabetic")]
    pub label_scheme: LabelScheme,
    /// Directory with subject indexes; enables RAG context injection
    #[arg(long)]
    pub rag_index: Option<PathBuf>,
    /// Chunks injected per item (with --rag-index)
    #[arg(long)]
    pub rag_k: Option<usize>,
    /// Language whose question text is embedded and receives the context
    #[arg(long, default_value = "uk")]
    pub rag_lang: LangTag,
    /// Verdict log output (JSON-Lines)
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

pub fn run(cmd: &QaCmd, config: &PipelineConfig) -> Result<(), CliError> {
    let QaCmd::Eval(args) = cmd;
    let max_orders = config.param_usize("max_orders", args.max_orders, 20);
    let orders_seed = config.seed("orders", args.orders_seed, 0);
    let langs = parse_langs(&args.langs)?;
    let backend = RoleComposite::resolve(&args.backend, config)?;

    let mut ctx = RunContext::new("qa-eval");
    ctx.input(&args.items)?;
    ctx.seed("orders", orders_seed);
    ctx.param("max_orders", max_orders);
    ctx.param("langs", &args.langs);
    ctx.param("label_scheme", format!("{:?}", args.label_scheme).to_lowercase());
    ctx.backends(backend.describe());

    let raw = load_mcq_strict(&args.items, &rejects_path_for(&args.out))?;
    let mut items: Vec<McqItem> = raw
        .iter()
        .map(|i| relabel(i, args.label_scheme))
        .collect::<Result<_, _>>()?;

    if let Some(index_dir) = &args.rag_index {
        let k = config.param_usize("k_rag", args.rag_k, 5);
        ctx.param("rag_k", k);
        ctx.param("rag_lang", args.rag_lang.code());
        let indexes = load_subject_indexes(
            index_dir,
            backend.embedding_dims(),
            backend.embedder.name(),
        )?;
        for item in &mut items {
            let chunks = retrieve_context(item, args.rag_lang, &indexes, k, &backend)?;
            let context: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
            item.context_by_lang
                .insert(args.rag_lang, context.join("\n\n"));
        }
    }

    let eval = evaluate_mcq_concurrent(
        &items,
        max_orders,
        orders_seed,
        &langs,
        &backend,
        config.workers(),
    )?;
    ctx.write_artifact(&args.out, &jsonl_bytes(&eval.verdicts))?;
    println!("{}", eval.report);
    println!(
        "verdicts: {} scored, {} failed -> {}",
        eval.verdicts.len(),
        eval.failures.len(),
        args.out.display()
    );
    for failure in &eval.failures {
        eprintln!("item {} failed: {}", failure.id, failure.error);
    }
    Ok(())
}
