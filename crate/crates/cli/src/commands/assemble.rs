//! `slavkit assemble` — build finetuning datasets and external job specs:
//! stage-1 instruction sets, stage-2 oversampled mixtures, learning-rate
//! search plans and back-translation slice jobs.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use slavkit_core::assembly::{
    build_stage1, build_stage2, plan_backtranslation, plan_lr_search, split_by_level,
    stage2_final_job, EvalSet, MixtureSpec, TaskKind, DEFAULT_LR_RATES,
};
use slavkit_core::corpus::{CefrLevel, LangTag, McqItem};
use slavkit_core::fewshot::MTDirection;
use slavkit_core::mcq::{relabel, LabelScheme};

use crate::artifacts::{read_lines, RunContext};
use crate::commands::{jsonl_bytes, load_mcq_strict, load_pairs_strict, parse_langs, rejects_path_for};
use crate::config::PipelineConfig;
use crate::errors::CliError;

#[derive(Debug, Subcommand)]
pub enum AssembleCmd {
    /// Stage-1 instruction set: zero-shot MT records plus MCQ records
    Stage1(Stage1Args),
    /// Stage-2 mixture: first-N MT pairs plus oversampled QA items
    Stage2(Stage2Args),
    /// Learning-rate search: per-rate single-epoch jobs with eval splits
    LrSearch(LrSearchArgs),
    /// Back-translation slice jobs plus the merge plan
    Backtranslate(BacktranslateArgs),
}

#[derive(Debug, Args)]
pub struct Stage1Args {
    /// MT training pairs (TSV or JSON-Lines)
    #[arg(long)]
    pub mt: PathBuf,
    /// Source language of --mt
    #[arg(long)]
    pub src: LangTag,
    /// Target language of --mt
    #[arg(long)]
    pub tgt: LangTag,
    /// MCQ items (JSON-Lines); optional
    #[arg(long)]
    pub mcq: Option<PathBuf>,
    /// Languages rendered into MCQ prompts, comma-separated (e.g. en,dsb)
    #[arg(long, default_value = "en")]
    pub langs: String,
    /// Shuffle seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// System message for every record (may be empty)
    #[arg(long, default_value = "")]
    pub system: String,
    /// Option label scheme applied to MCQ items before rendering
    #[arg(long, default_value = "alphabetic")]
    pub label_scheme: LabelScheme,
    /// Output instruction dataset (JSON-Lines)
    #[arg(long)]
    pub out: PathBuf,
}

fn load_relabeled(
    path: &Path,
    scheme: LabelScheme,
    out: &Path,
) -> Result<Vec<McqItem>, CliError> {
    let items = load_mcq_strict(path, &rejects_path_for(out))?;
    items
        .iter()
        .map(|i| relabel(i, scheme).map_err(CliError::from))
        .collect()
}

pub fn run_stage1(args: &Stage1Args, config: &PipelineConfig) -> Result<(), CliError> {
    let seed = config.seed("shuffle", args.seed, 0);
    let langs = parse_langs(&args.langs)?;
    let mut ctx = RunContext::new("assemble-stage1");
    ctx.input(&args.mt)?;
    ctx.seed("shuffle", seed);
    ctx.param("src", args.src.code());
    ctx.param("tgt", args.tgt.code());
    ctx.param("langs", &args.langs);
    ctx.param("system", &args.system);

    let pairs = load_pairs_strict(&args.mt, args.src, args.tgt, &rejects_path_for(&args.out))?;
    let items = match &args.mcq {
        Some(path) => {
            ctx.input(path)?;
            load_relabeled(path, args.label_scheme, &args.out)?
        }
        None => Vec::new(),
    };
    let records = build_stage1(&pairs, &items, &langs, seed, &args.system)?;
    ctx.write_artifact(&args.out, &jsonl_bytes(&records))?;
    let mt_count = records.iter().filter(|r| r.task == TaskKind::Mt).count();
    println!(
        "stage1: {} records (mt={}, mcq={})",
        records.len(),
        mt_count,
        records.len() - mt_count
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct Stage2Args {
    /// Stage-1 MT corpus in its persisted order (TSV or JSON-Lines)
    #[arg(long)]
    pub mt: PathBuf,
    #[arg(long)]
    pub src: LangTag,
    #[arg(long)]
    pub tgt: LangTag,
    /// In-domain QA items (JSON-Lines)
    #[arg(long)]
    pub mcq: PathBuf,
    #[arg(long, default_value = "en")]
    pub langs: String,
    /// Repetitions of each QA item
    #[arg(long, default_value_t = 5)]
    pub qa_repeat: usize,
    /// Leading MT pairs to take, in corpus order
    #[arg(long, default_value_t = 3000)]
    pub mt_take: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "")]
    pub system: String,
    #[arg(long, default_value = "alphabetic")]
    pub label_scheme: LabelScheme,
    /// Output mixture dataset (JSON-Lines)
    #[arg(long)]
    pub out: PathBuf,
    /// Also emit the final two-epoch finetune job spec here
    #[arg(long, requires = "lr")]
    pub job_out: Option<PathBuf>,
    /// Learning rate for the final job
    #[arg(long)]
    pub lr: Option<f64>,
    /// Model output path recorded in the job spec
    #[arg(long, default_value = "stage2-model")]
    pub model_out: PathBuf,
}

pub fn run_stage2(args: &Stage2Args, config: &PipelineConfig) -> Result<(), CliError> {
    let seed = config.seed("shuffle", args.seed, 0);
    let langs = parse_langs(&args.langs)?;
    let mut ctx = RunContext::new("assemble-stage2");
    ctx.input(&args.mt)?;
    ctx.input(&args.mcq)?;
    ctx.seed("shuffle", seed);
    ctx.param("qa_repeat", args.qa_repeat);
    ctx.param("mt_take", args.mt_take);
    ctx.param("langs", &args.langs);

    let mixture = MixtureSpec {
        mt_pairs: load_pairs_strict(&args.mt, args.src, args.tgt, &rejects_path_for(&args.out))?,
        qa_items: load_relabeled(&args.mcq, args.label_scheme, &args.out)?,
        qa_repeat: args.qa_repeat,
        mt_take: args.mt_take,
        shuffle_seed: seed,
    };
    let records = build_stage2(&mixture, &langs, &args.system)?;
    ctx.write_artifact(&args.out, &jsonl_bytes(&records))?;
    println!(
        "stage2: {} records ({} mt + {} qa x {})",
        records.len(),
        args.mt_take,
        mixture.qa_items.len(),
        args.qa_repeat
    );

    if let Some(job_out) = &args.job_out {
        let lr = args.lr.expect("clap requires --lr with --job-out");
        let job = stage2_final_job(&args.out, lr, &args.model_out)?;
        let mut body = serde_json::to_vec_pretty(&job)?;
        body.push(b'\n');
        ctx.write_artifact(job_out, &body)?;
        println!("final finetune job: {}", job_out.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct LrSearchArgs {
    /// Stage-1 MT corpus in its persisted order
    #[arg(long)]
    pub mt: PathBuf,
    #[arg(long)]
    pub src: LangTag,
    #[arg(long)]
    pub tgt: LangTag,
    /// In-domain QA items (JSON-Lines); the eval level is held out
    #[arg(long)]
    pub mcq: PathBuf,
    /// MT development set used for evaluation
    #[arg(long)]
    pub mt_dev: PathBuf,
    #[arg(long, default_value = "en")]
    pub langs: String,
    /// CEFR level held out of training for QA evaluation
    #[arg(long, default_value = "B2")]
    pub eval_level: String,
    /// Leading MT dev pairs used for MT evaluation
    #[arg(long, default_value_t = 400)]
    pub mt_eval_take: usize,
    #[arg(long, default_value_t = 5)]
    pub qa_repeat: usize,
    #[arg(long, default_value_t = 3000)]
    pub mt_take: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "")]
    pub system: String,
    #[arg(long, default_value = "alphabetic")]
    pub label_scheme: LabelScheme,
    /// Learning rates to search, comma-separated
    #[arg(long)]
    pub rates: Option<String>,
    /// Directory for the dataset, plan and job files
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_level(s: &str) -> Result<CefrLevel, CliError> {
    match s {
        "A1" => Ok(CefrLevel::A1),
        "A2" => Ok(CefrLevel::A2),
        "B1" => Ok(CefrLevel::B1),
        "B2" => Ok(CefrLevel::B2),
        "C1" => Ok(CefrLevel::C1),
        other => Err(CliError::Usage(format!("unknown CEFR level `{other}`"))),
    }
}

fn parse_rates(spec: Option<&str>) -> Result<Vec<f64>, CliError> {
    match spec {
        None => Ok(DEFAULT_LR_RATES.to_vec()),
        Some(s) => s
            .split(',')
            .map(|r| {
                r.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("bad rate `{r}`: {e}")))
            })
            .collect(),
    }
}

pub fn run_lr_search(args: &LrSearchArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let seed = config.seed("shuffle", args.seed, 0);
    let langs = parse_langs(&args.langs)?;
    let level = parse_level(&args.eval_level)?;
    let rates = parse_rates(args.rates.as_deref())?;
    std::fs::create_dir_all(&args.out_dir)?;
    let dataset_path = args.out_dir.join("stage2-train.jsonl");

    let mut ctx = RunContext::new("assemble-lr-search");
    ctx.input(&args.mt)?;
    ctx.input(&args.mcq)?;
    ctx.input(&args.mt_dev)?;
    ctx.seed("shuffle", seed);
    ctx.param("eval_level", &args.eval_level);
    ctx.param("mt_eval_take", args.mt_eval_take);
    ctx.param("qa_repeat", args.qa_repeat);
    ctx.param("mt_take", args.mt_take);
    ctx.param("rates", &rates);

    let items = load_relabeled(&args.mcq, args.label_scheme, &dataset_path)?;
    let (train_items, qa_eval) = split_by_level(&items, level);
    if qa_eval.is_empty() {
        return Err(CliError::Data(format!(
            "no {level:?} items in {} to evaluate on",
            args.mcq.display()
        )));
    }
    let mt_pairs = load_pairs_strict(&args.mt, args.src, args.tgt, &rejects_path_for(&dataset_path))?;
    let mt_dev = load_pairs_strict(
        &args.mt_dev,
        args.src,
        args.tgt,
        &rejects_path_for(&dataset_path),
    )?;
    let mt_eval: Vec<_> = mt_dev.iter().take(args.mt_eval_take).cloned().collect();

    let mixture = MixtureSpec {
        mt_pairs,
        qa_items: train_items.clone(),
        qa_repeat: args.qa_repeat,
        mt_take: args.mt_take,
        shuffle_seed: seed,
    };
    let records = build_stage2(&mixture, &langs, &args.system)?;
    ctx.write_artifact(&dataset_path, &jsonl_bytes(&records))?;

    let (plan, jobs) = plan_lr_search(
        &rates,
        &train_items,
        EvalSet::new(&qa_eval, &args.mcq, &format!("level={}", args.eval_level)),
        EvalSet::new(&mt_eval, &args.mt_dev, &format!("indices=0..{}", mt_eval.len())),
        &dataset_path,
        &args.out_dir,
    )?;

    let mut plan_body = serde_json::to_vec_pretty(&plan)?;
    plan_body.push(b'\n');
    ctx.write_artifact(&args.out_dir.join("plan.json"), &plan_body)?;
    for (i, job) in jobs.iter().enumerate() {
        let mut body = serde_json::to_vec_pretty(job)?;
        body.push(b'\n');
        ctx.write_artifact(&args.out_dir.join(format!("job-{i}.json")), &body)?;
    }
    println!(
        "lr-search: {} jobs over rates {:?}; dataset {} records; eval qa={} mt={}",
        jobs.len(),
        rates,
        records.len(),
        qa_eval.len(),
        mt_eval.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct BacktranslateArgs {
    /// Monolingual sentences, one per line
    #[arg(long)]
    pub monolingual: PathBuf,
    /// Back-translation direction, e.g. hsb-de
    #[arg(long)]
    pub direction: MTDirection,
    /// Sentences per job
    #[arg(long, default_value_t = 10_000)]
    pub batch: usize,
    /// Only back-translate the first N sentences
    #[arg(long)]
    pub take: Option<usize>,
    /// Directory for job and plan files
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run_backtranslate(args: &BacktranslateArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let _ = config;
    let mut ctx = RunContext::new("assemble-backtranslate");
    ctx.input(&args.monolingual)?;
    ctx.param("direction", args.direction.to_string());
    ctx.param("batch", args.batch);

    let mut sentences: Vec<String> = read_lines(&args.monolingual)?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if let Some(take) = args.take {
        ctx.param("take", take);
        sentences.truncate(take);
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let plan = plan_backtranslation(
        &sentences,
        &args.monolingual,
        &args.direction,
        args.batch,
        &args.out_dir,
    )?;
    for (i, job) in plan.jobs.iter().enumerate() {
        let mut body = serde_json::to_vec_pretty(job)?;
        body.push(b'\n');
        ctx.write_artifact(&args.out_dir.join(format!("job-{i:04}.json")), &body)?;
    }
    let mut plan_body = serde_json::to_vec_pretty(&plan)?;
    plan_body.push(b'\n');
    ctx.write_artifact(&args.out_dir.join("plan.json"), &plan_body)?;
    println!(
        "backtranslate: {} jobs covering {} sentences (batch {}) + merge plan",
        plan.jobs.len(),
        sentences.len(),
        args.batch
    );
    Ok(())
}

pub fn run(cmd: &AssembleCmd, config: &PipelineConfig) -> Result<(), CliError> {
    match cmd {
        AssembleCmd::Stage1(a) => run_stage1(a, config),
        AssembleCmd::Stage2(a) => run_stage2(a, config),
        AssembleCmd::LrSearch(a) => run_lr_search(a, config),
        AssembleCmd::Backtranslate(a) => run_backtranslate(a, config),
    }
}
