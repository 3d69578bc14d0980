//! `slavkit score` — corpus metrics over line-aligned files, printed as
//! `metric=value n=count`.

use std::path::PathBuf;

use clap::Args;

use slavkit_core::metrics::{accuracy, bleu, chrfpp, ChrfParams, MetricKind};

use crate::artifacts::read_lines;
use crate::config::PipelineConfig;
use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Metric to compute
    #[arg(long, value_parser = parse_metric)]
    pub metric: MetricKind,
    /// Hypothesis file, one segment (or label) per line
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference file, line-aligned with --hyp
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// ChrF++ character n-gram order
    #[arg(long, default_value_t = 6)]
    pub char_order: usize,
    /// ChrF++ word n-gram order
    #[arg(long, default_value_t = 2)]
    pub word_order: usize,
    /// ChrF++ beta (recall weight)
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    match s {
        "chrfpp" => Ok(MetricKind::Chrfpp),
        "bleu" => Ok(MetricKind::Bleu),
        "accuracy" => Ok(MetricKind::Accuracy),
        other => Err(format!("unknown metric `{other}` (chrfpp|bleu|accuracy)")),
    }
}

pub fn run(args: &ScoreArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let _ = config;
    let hyps = read_lines(&args.hyp)?;
    let refs = read_lines(&args.reference)?;
    let report = match args.metric {
        MetricKind::Chrfpp => chrfpp(
            &hyps,
            &refs,
            &ChrfParams {
                char_order: args.char_order,
                word_order: args.word_order,
                beta: args.beta,
            },
        )?,
        MetricKind::Bleu => bleu(&hyps, &refs)?,
        MetricKind::Accuracy => accuracy(&hyps, &refs)?,
    };
    println!("{report}");
    Ok(())
}
