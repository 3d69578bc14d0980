//! Builds the datasets and job specifications the two-stage finetuning
//! consumes: stage-1 MT + bilingual MCQ instruction sets, stage-2 oversampled
//! in-domain mixtures, learning-rate-search plans and back-translation jobs.
//!
//! This module only produces trainer inputs and consumes metric outputs; the
//! gradient updates themselves run externally against the emitted job specs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CefrLevel, LangTag, McqItem, ParallelPair};
use crate::fewshot::{render_mt_prompt, FewshotError, MTDirection};
use crate::mcq::{render_mcq_prompt, McqError};

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("record {index}: {source}")]
    Render {
        index: usize,
        #[source]
        source: McqError,
    },
    #[error(transparent)]
    Direction(#[from] FewshotError),
    #[error("empty {0} text in instruction record")]
    EmptyField(&'static str),
    #[error("mt_take {take} exceeds the {available} available pairs")]
    MtTakeTooLarge { take: usize, available: usize },
    #[error("qa_repeat must be >= 1")]
    ZeroRepeat,
    #[error("learning rates must be distinct and positive")]
    BadRates,
    #[error("empty evaluation set: {0}")]
    EmptyEval(&'static str),
    #[error("leakage: training item `{0}` is in the QA evaluation set")]
    Leakage(String),
    #[error("dataset file does not exist: {0}")]
    MissingDataset(PathBuf),
    #[error("no monolingual sentences")]
    NoMonolingual,
    #[error("batch size must be >= 1")]
    ZeroBatch,
    #[error("merge shape mismatch: {outputs} outputs for {originals} originals")]
    MergeMismatch { outputs: usize, originals: usize },
}

/// A complete training instruction: system + user + assistant.
/// The system text is a fixed configurable string and may be empty; chat
/// template application belongs to the external trainer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub system: String,
    pub user: String,
    pub assistant: String,
    pub task: TaskKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Mt,
    Mcq,
}

impl InstructionRecord {
    fn validate(&self) -> Result<(), AssemblyError> {
        if self.user.is_empty() {
            return Err(AssemblyError::EmptyField("user"));
        }
        if self.assistant.is_empty() {
            return Err(AssemblyError::EmptyField("assistant"));
        }
        Ok(())
    }
}

/// Seeded Fisher–Yates: for `i` from `len-1` down to 1, swap `i` with a
/// uniform index in `0..=i`. Pinned here so dataset order is reproducible
/// from the seed alone.
fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

fn mt_record(pair: &ParallelPair, system: &str) -> Result<InstructionRecord, AssemblyError> {
    let direction = MTDirection::new(pair.source_lang, pair.target_lang)?;
    let record = InstructionRecord {
        system: system.to_string(),
        user: render_mt_prompt(&[], &pair.source_text, &direction),
        assistant: format!(
            "{} {} {}",
            direction.open_tag(),
            pair.target_text,
            direction.close_tag()
        ),
        task: TaskKind::Mt,
    };
    record.validate()?;
    Ok(record)
}

fn mcq_record(
    item: &McqItem,
    langs: &[LangTag],
    system: &str,
    index: usize,
) -> Result<InstructionRecord, AssemblyError> {
    let identity: Vec<usize> = (0..item.options.len()).collect();
    let user = render_mcq_prompt(item, &identity, langs)
        .map_err(|source| AssemblyError::Render { index, source })?;
    let record = InstructionRecord {
        system: system.to_string(),
        user,
        assistant: item.gold_label.clone(),
        task: TaskKind::Mcq,
    };
    record.validate()?;
    Ok(record)
}

/// Stage-1 instruction set: one zero-shot MT record per pair (assistant is
/// the tagged target line) and one MCQ record per item (gold withheld from
/// the prompt, assistant is the gold label), concatenated and shuffled with
/// the seed.
pub fn build_stage1(
    mt: &[ParallelPair],
    mcq: &[McqItem],
    langs: &[LangTag],
    seed: u64,
    system: &str,
) -> Result<Vec<InstructionRecord>, AssemblyError> {
    let mut records = Vec::with_capacity(mt.len() + mcq.len());
    for pair in mt {
        records.push(mt_record(pair, system)?);
    }
    for (i, item) in mcq.iter().enumerate() {
        records.push(mcq_record(item, langs, system, i)?);
    }
    seeded_shuffle(&mut records, seed);
    Ok(records)
}

/// The stage-2 mixture recipe: the first `mt_take` pairs of the stage-1 MT
/// corpus in persisted order plus each QA item repeated `qa_repeat` times.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub mt_pairs: Vec<ParallelPair>,
    pub qa_items: Vec<McqItem>,
    pub qa_repeat: usize,
    pub mt_take: usize,
    pub shuffle_seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        if self.qa_repeat == 0 {
            return Err(AssemblyError::ZeroRepeat);
        }
        if self.mt_take > self.mt_pairs.len() {
            return Err(AssemblyError::MtTakeTooLarge {
                take: self.mt_take,
                available: self.mt_pairs.len(),
            });
        }
        Ok(())
    }
}

/// Stage-2 mixture: exactly `mt_take + qa_repeat * |qa_items|` records,
/// shuffled with the mixture seed.
pub fn build_stage2(
    mixture: &MixtureSpec,
    langs: &[LangTag],
    system: &str,
) -> Result<Vec<InstructionRecord>, AssemblyError> {
    mixture.validate()?;
    let mut records = Vec::with_capacity(
        mixture.mt_take + mixture.qa_repeat * mixture.qa_items.len(),
    );
    for pair in &mixture.mt_pairs[..mixture.mt_take] {
        records.push(mt_record(pair, system)?);
    }
    for (i, item) in mixture.qa_items.iter().enumerate() {
        let record = mcq_record(item, langs, system, i)?;
        for _ in 0..mixture.qa_repeat {
            records.push(record.clone());
        }
    }
    seeded_shuffle(&mut records, mixture.shuffle_seed);
    Ok(records)
}

/// A serialized description of an external training or translation job. The
/// toolkit emits these; it never executes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub kind: JobKind,
    pub dataset: PathBuf,
    pub hyperparams: BTreeMap<String, serde_json::Value>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Finetune,
    Backtranslate,
}

impl JobSpec {
    /// Job specs must reference existing dataset files at emission time.
    pub fn validate(&self) -> Result<(), AssemblyError> {
        if !self.dataset.exists() {
            return Err(AssemblyError::MissingDataset(self.dataset.clone()));
        }
        Ok(())
    }
}

/// References a concrete subset of a dataset file for post-hoc evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetDescriptor {
    pub source: PathBuf,
    pub selector: String,
    pub count: usize,
}

/// The learning-rate search: one single-epoch finetune job per rate over a
/// shared dataset, with the two evaluation subsets recorded for later
/// checkpoint selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LRSearchPlan {
    pub rates: Vec<f64>,
    pub epochs_per_rate: usize,
    pub eval_qa: SubsetDescriptor,
    pub eval_mt: SubsetDescriptor,
}

/// The default search grid.
pub const DEFAULT_LR_RATES: [f64; 4] = [1e-4, 1e-5, 1e-6, 1e-7];

/// Partition items by CEFR level: items at `level` become the evaluation
/// set, everything else stays in training.
pub fn split_by_level(items: &[McqItem], level: CefrLevel) -> (Vec<McqItem>, Vec<McqItem>) {
    let (eval, train): (Vec<McqItem>, Vec<McqItem>) =
        items.iter().cloned().partition(|i| i.level == level);
    (train, eval)
}

/// A held-out evaluation subset: the resolved records plus where they came
/// from, recorded in the plan for post-hoc checkpoint selection.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a, T> {
    pub records: &'a [T],
    pub source: &'a Path,
    pub selector: &'a str,
}

impl<'a, T> EvalSet<'a, T> {
    pub fn new(records: &'a [T], source: &'a Path, selector: &'a str) -> Self {
        EvalSet {
            records,
            source,
            selector,
        }
    }

    fn descriptor(&self) -> SubsetDescriptor {
        SubsetDescriptor {
            source: self.source.to_path_buf(),
            selector: self.selector.to_string(),
            count: self.records.len(),
        }
    }
}

/// Plan the learning-rate search: one finetune job per rate, one epoch each,
/// all sharing `dataset_path`. Training items must not overlap the QA
/// evaluation set, or the plan is rejected naming the leaked id.
pub fn plan_lr_search(
    rates: &[f64],
    train_items: &[McqItem],
    qa_eval: EvalSet<'_, McqItem>,
    mt_eval: EvalSet<'_, ParallelPair>,
    dataset_path: &Path,
    output_dir: &Path,
) -> Result<(LRSearchPlan, Vec<JobSpec>), AssemblyError> {
    if rates.is_empty() || rates.iter().any(|r| *r <= 0.0) {
        return Err(AssemblyError::BadRates);
    }
    for (i, a) in rates.iter().enumerate() {
        if rates[i + 1..].contains(a) {
            return Err(AssemblyError::BadRates);
        }
    }
    if qa_eval.records.is_empty() {
        return Err(AssemblyError::EmptyEval("qa"));
    }
    if mt_eval.records.is_empty() {
        return Err(AssemblyError::EmptyEval("mt"));
    }
    let eval_ids: std::collections::HashSet<&str> =
        qa_eval.records.iter().map(|i| i.id.as_str()).collect();
    for item in train_items {
        if eval_ids.contains(item.id.as_str()) {
            return Err(AssemblyError::Leakage(item.id.clone()));
        }
    }

    let plan = LRSearchPlan {
        rates: rates.to_vec(),
        epochs_per_rate: 1,
        eval_qa: qa_eval.descriptor(),
        eval_mt: mt_eval.descriptor(),
    };
    let jobs: Vec<JobSpec> = rates
        .iter()
        .map(|&lr| {
            let job = JobSpec {
                kind: JobKind::Finetune,
                dataset: dataset_path.to_path_buf(),
                hyperparams: BTreeMap::from([
                    ("lr".to_string(), serde_json::json!(lr)),
                    ("epochs".to_string(), serde_json::json!(1)),
                    ("validation".to_string(), serde_json::json!("none")),
                ]),
                output: output_dir.join(format!("lr-{lr:e}")),
            };
            job.validate()?;
            Ok(job)
        })
        .collect::<Result<_, AssemblyError>>()?;
    Ok((plan, jobs))
}

/// The final stage-2 finetune job: two epochs at the selected rate with no
/// validation.
pub fn stage2_final_job(
    dataset_path: &Path,
    lr: f64,
    output: &Path,
) -> Result<JobSpec, AssemblyError> {
    if lr <= 0.0 {
        return Err(AssemblyError::BadRates);
    }
    let job = JobSpec {
        kind: JobKind::Finetune,
        dataset: dataset_path.to_path_buf(),
        hyperparams: BTreeMap::from([
            ("lr".to_string(), serde_json::json!(lr)),
            ("epochs".to_string(), serde_json::json!(2)),
            ("validation".to_string(), serde_json::json!("none")),
        ]),
        output: output.to_path_buf(),
    };
    job.validate()?;
    Ok(job)
}

/// Instructions for pairing job outputs with their originals after the
/// external translator has run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergePlan {
    /// Translation output file expected from each job, in job order.
    pub job_outputs: Vec<PathBuf>,
    /// The monolingual input file the jobs sliced.
    pub monolingual: PathBuf,
    /// The back-translation direction the jobs ran.
    pub direction: String,
}

/// A back-translation plan: slice jobs plus the final merge instruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktranslationPlan {
    pub jobs: Vec<JobSpec>,
    pub merge: MergePlan,
}

/// Plan back-translation of `monolingual` sentences in `ceil(n/batch)` slice
/// jobs, covering the sentences in order. `direction` is the job direction
/// (e.g. hsb→de); the merge step later pairs each produced sentence (source
/// side) with its original (target side).
pub fn plan_backtranslation(
    monolingual: &[String],
    monolingual_path: &Path,
    direction: &MTDirection,
    batch: usize,
    output_dir: &Path,
) -> Result<BacktranslationPlan, AssemblyError> {
    if monolingual.is_empty() {
        return Err(AssemblyError::NoMonolingual);
    }
    if batch == 0 {
        return Err(AssemblyError::ZeroBatch);
    }
    let n = monolingual.len();
    let n_jobs = n.div_ceil(batch);
    let mut jobs = Vec::with_capacity(n_jobs);
    let mut job_outputs = Vec::with_capacity(n_jobs);
    for j in 0..n_jobs {
        let start = j * batch;
        let end = ((j + 1) * batch).min(n);
        let output = output_dir.join(format!("bt-{j:04}.txt"));
        let job = JobSpec {
            kind: JobKind::Backtranslate,
            dataset: monolingual_path.to_path_buf(),
            hyperparams: BTreeMap::from([
                ("direction".to_string(), serde_json::json!(direction.to_string())),
                ("start".to_string(), serde_json::json!(start)),
                ("end".to_string(), serde_json::json!(end)),
            ]),
            output: output.clone(),
        };
        job.validate()?;
        job_outputs.push(output);
        jobs.push(job);
    }
    Ok(BacktranslationPlan {
        jobs,
        merge: MergePlan {
            job_outputs,
            monolingual: monolingual_path.to_path_buf(),
            direction: direction.to_string(),
        },
    })
}

/// Pair back-translation outputs with their originals: the produced sentence
/// becomes the source side, the original monolingual sentence the target
/// side. Output order follows the originals.
pub fn merge_backtranslations(
    job_outputs: &[Vec<String>],
    originals: &[String],
    direction: &MTDirection,
) -> Result<Vec<ParallelPair>, AssemblyError> {
    let produced: Vec<&String> = job_outputs.iter().flatten().collect();
    if produced.len() != originals.len() {
        return Err(AssemblyError::MergeMismatch {
            outputs: produced.len(),
            originals: originals.len(),
        });
    }
    produced
        .iter()
        .zip(originals)
        .map(|(src, tgt)| {
            ParallelPair::new(src, tgt, direction.target, direction.source, "backtranslation")
                .map_err(|_| AssemblyError::EmptyField("merged pair"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{McqOption, Subject};
    use std::collections::BTreeMap;

    fn pair(i: usize) -> ParallelPair {
        ParallelPair::new(
            &format!("Satz {i}"),
            &format!("sada {i}"),
            LangTag::De,
            LangTag::Hsb,
            "train",
        )
        .unwrap()
    }

    fn item(id: &str, level: CefrLevel) -> McqItem {
        McqItem {
            id: id.to_string(),
            subject: Subject::None,
            level,
            context_by_lang: BTreeMap::new(),
            question_by_lang: BTreeMap::from([(LangTag::En, format!("Q {id}?"))]),
            options: vec![
                McqOption {
                    label: "A".into(),
                    text_by_lang: BTreeMap::from([(LangTag::En, "yes".to_string())]),
                },
                McqOption {
                    label: "B".into(),
                    text_by_lang: BTreeMap::from([(LangTag::En, "no".to_string())]),
                },
            ],
            gold_label: "A".to_string(),
        }
    }

    #[test]
    fn stage1_counts_and_shapes() {
        let records = build_stage1(
            &[pair(0), pair(1)],
            &[item("q1", CefrLevel::A1)],
            &[LangTag::En],
            7,
            "",
        )
        .unwrap();
        assert_eq!(records.len(), 3);
        let mt = records.iter().filter(|r| r.task == TaskKind::Mt).count();
        let mcq = records.iter().filter(|r| r.task == TaskKind::Mcq).count();
        assert_eq!((mt, mcq), (2, 1));
        let mt_rec = records.iter().find(|r| r.task == TaskKind::Mt).unwrap();
        assert!(mt_rec.user.starts_with("Translate this German sentence into Upper Sorbian."));
        assert!(mt_rec.assistant.starts_with("<hsb> sada"));
        assert!(mt_rec.assistant.ends_with("</hsb>"));
        let mcq_rec = records.iter().find(|r| r.task == TaskKind::Mcq).unwrap();
        assert!(mcq_rec.user.ends_with("Answer:"));
        assert_eq!(mcq_rec.assistant, "A");
    }

    #[test]
    fn stage1_same_seed_identical() {
        let mt: Vec<ParallelPair> = (0..20).map(pair).collect();
        let a = build_stage1(&mt, &[], &[LangTag::En], 5, "").unwrap();
        let b = build_stage1(&mt, &[], &[LangTag::En], 5, "").unwrap();
        assert_eq!(a, b);
        let c = build_stage1(&mt, &[], &[LangTag::En], 6, "").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stage1_shuffle_matches_independent_oracle() {
        // oracle: apply the documented Fisher-Yates swap sequence to the
        // index list with its own rng, then compare against unshuffled input
        let mt: Vec<ParallelPair> = (0..100).map(pair).collect();
        let items: Vec<McqItem> = (0..50).map(|i| item(&format!("q{i}"), CefrLevel::A1)).collect();
        let seed = 99u64;
        let got = build_stage1(&mt, &items, &[LangTag::En], seed, "").unwrap();

        let unshuffled: Vec<InstructionRecord> = {
            let mut v = Vec::new();
            for p in &mt {
                v.push(mt_record(p, "").unwrap());
            }
            for (i, it) in items.iter().enumerate() {
                v.push(mcq_record(it, &[LangTag::En], "", i).unwrap());
            }
            v
        };
        let mut indices: Vec<usize> = (0..unshuffled.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..indices.len()).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        let expected: Vec<InstructionRecord> =
            indices.iter().map(|&i| unshuffled[i].clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn stage2_headline_mixture_count() {
        let mixture = MixtureSpec {
            mt_pairs: (0..3000).map(pair).collect(),
            qa_items: (0..158).map(|i| item(&format!("q{i}"), CefrLevel::A2)).collect(),
            qa_repeat: 5,
            mt_take: 3000,
            shuffle_seed: 3,
        };
        let records = build_stage2(&mixture, &[LangTag::En], "").unwrap();
        assert_eq!(records.len(), 3790);
        assert_eq!(records.iter().filter(|r| r.task == TaskKind::Mt).count(), 3000);
        assert_eq!(records.iter().filter(|r| r.task == TaskKind::Mcq).count(), 790);
    }

    #[test]
    fn stage2_repeat_one_take_zero() {
        let mixture = MixtureSpec {
            mt_pairs: vec![],
            qa_items: (0..4).map(|i| item(&format!("q{i}"), CefrLevel::A1)).collect(),
            qa_repeat: 1,
            mt_take: 0,
            shuffle_seed: 1,
        };
        let records = build_stage2(&mixture, &[LangTag::En], "").unwrap();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.task == TaskKind::Mcq));
    }

    #[test]
    fn stage2_per_item_multiplicity_exact() {
        let mixture = MixtureSpec {
            mt_pairs: (0..10).map(pair).collect(),
            qa_items: (0..6).map(|i| item(&format!("q{i}"), CefrLevel::B1)).collect(),
            qa_repeat: 5,
            mt_take: 4,
            shuffle_seed: 11,
        };
        let records = build_stage2(&mixture, &[LangTag::En], "").unwrap();
        // counting oracle over the output: each item's prompt appears 5 times
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in records.iter().filter(|r| r.task == TaskKind::Mcq) {
            *counts.entry(r.user.as_str()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| c == 5));
    }

    #[test]
    fn stage2_multiset_is_seed_invariant() {
        let mixture = |seed| MixtureSpec {
            mt_pairs: (0..10).map(pair).collect(),
            qa_items: (0..3).map(|i| item(&format!("q{i}"), CefrLevel::A1)).collect(),
            qa_repeat: 2,
            mt_take: 5,
            shuffle_seed: seed,
        };
        let key = |records: Vec<InstructionRecord>| {
            let mut keys: Vec<String> =
                records.into_iter().map(|r| format!("{}\u{0}{}", r.user, r.assistant)).collect();
            keys.sort();
            keys
        };
        let a = key(build_stage2(&mixture(1), &[LangTag::En], "").unwrap());
        let b = key(build_stage2(&mixture(2), &[LangTag::En], "").unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn stage2_rejects_oversized_take() {
        let mixture = MixtureSpec {
            mt_pairs: (0..5).map(pair).collect(),
            qa_items: vec![item("q", CefrLevel::A1)],
            qa_repeat: 1,
            mt_take: 6,
            shuffle_seed: 0,
        };
        assert!(matches!(
            build_stage2(&mixture, &[LangTag::En], ""),
            Err(AssemblyError::MtTakeTooLarge { .. })
        ));
    }

    fn touch(dir: &Path, name: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, "x").unwrap();
        p
    }

    #[test]
    fn lr_search_default_rates_four_jobs() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = touch(dir.path(), "stage2.jsonl");
        let items: Vec<McqItem> = (0..10).map(|i| item(&format!("t{i}"), CefrLevel::A1)).collect();
        let eval: Vec<McqItem> = (0..56).map(|i| item(&format!("b2-{i}"), CefrLevel::B2)).collect();
        let mt_eval: Vec<ParallelPair> = (0..400).map(pair).collect();
        let (plan, jobs) = plan_lr_search(
            &DEFAULT_LR_RATES,
            &items,
            EvalSet::new(&eval, Path::new("qa-dev.jsonl"), "level=B2"),
            EvalSet::new(&mt_eval, Path::new("mt-dev.tsv"), "indices=0..400"),
            &dataset,
            dir.path(),
        )
        .unwrap();
        assert_eq!(jobs.len(), 4);
        let lrs: Vec<f64> = jobs
            .iter()
            .map(|j| j.hyperparams["lr"].as_f64().unwrap())
            .collect();
        assert_eq!(lrs, DEFAULT_LR_RATES);
        assert!(jobs.iter().all(|j| j.hyperparams["epochs"] == serde_json::json!(1)));
        assert_eq!(plan.epochs_per_rate, 1);
        assert_eq!(plan.eval_qa.count, 56);
        assert_eq!(plan.eval_mt.count, 400);
        assert_eq!(plan.eval_mt.selector, "indices=0..400");
    }

    #[test]
    fn lr_search_rejects_leakage_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = touch(dir.path(), "stage2.jsonl");
        let eval = vec![item("b2-3", CefrLevel::B2)];
        let train = vec![item("t1", CefrLevel::A1), item("b2-3", CefrLevel::B2)];
        let err = plan_lr_search(
            &DEFAULT_LR_RATES,
            &train,
            EvalSet::new(&eval, Path::new("qa.jsonl"), "level=B2"),
            EvalSet::new(&[pair(0)], Path::new("mt.tsv"), "indices=0..1"),
            &dataset,
            dir.path(),
        )
        .unwrap_err();
        match err {
            AssemblyError::Leakage(id) => assert_eq!(id, "b2-3"),
            other => panic!("expected leakage, got {other}"),
        }
    }

    #[test]
    fn lr_search_rejects_missing_dataset_and_bad_rates() {
        let dir = tempfile::tempdir().unwrap();
        let eval = vec![item("e", CefrLevel::B2)];
        let missing = dir.path().join("absent.jsonl");
        assert!(matches!(
            plan_lr_search(
                &DEFAULT_LR_RATES,
                &[],
                EvalSet::new(&eval, Path::new("q"), "s"),
                EvalSet::new(&[pair(0)], Path::new("m"), "s"),
                &missing,
                dir.path(),
            ),
            Err(AssemblyError::MissingDataset(_))
        ));
        let dataset = touch(dir.path(), "d.jsonl");
        assert!(matches!(
            plan_lr_search(
                &[1e-4, 1e-4],
                &[],
                EvalSet::new(&eval, Path::new("q"), "s"),
                EvalSet::new(&[pair(0)], Path::new("m"), "s"),
                &dataset,
                dir.path(),
            ),
            Err(AssemblyError::BadRates)
        ));
    }

    #[test]
    fn split_by_level_partitions() {
        let items = vec![
            item("a", CefrLevel::A1),
            item("b", CefrLevel::B2),
            item("c", CefrLevel::B2),
            item("d", CefrLevel::C1),
        ];
        let (train, eval) = split_by_level(&items, CefrLevel::B2);
        assert_eq!(train.len(), 2);
        assert_eq!(eval.len(), 2);
        assert!(eval.iter().all(|i| i.level == CefrLevel::B2));
    }

    #[test]
    fn backtranslation_job_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let mono_path = touch(dir.path(), "mono.txt");
        let direction = MTDirection::new(LangTag::Hsb, LangTag::De).unwrap();
        let sentences: Vec<String> = (0..100).map(|i| format!("sada {i}")).collect();
        let plan =
            plan_backtranslation(&sentences, &mono_path, &direction, 10, dir.path()).unwrap();
        assert_eq!(plan.jobs.len(), 10);
        assert_eq!(plan.merge.job_outputs.len(), 10);
        assert_eq!(plan.jobs[3].hyperparams["start"], serde_json::json!(30));
        assert_eq!(plan.jobs[3].hyperparams["end"], serde_json::json!(40));
        assert_eq!(plan.jobs[9].hyperparams["end"], serde_json::json!(100));

        let single = plan_backtranslation(
            &sentences[..1],
            &mono_path,
            &direction,
            10_000,
            dir.path(),
        )
        .unwrap();
        assert_eq!(single.jobs.len(), 1);
    }

    #[test]
    fn merge_roundtrip_with_mock_translator() {
        // mock translator: reverse the characters of each sentence
        let direction = MTDirection::new(LangTag::Hsb, LangTag::De).unwrap();
        let originals: Vec<String> = (0..25).map(|i| format!("sada {i}")).collect();
        let job_outputs: Vec<Vec<String>> = originals
            .chunks(10)
            .map(|c| c.iter().map(|s| s.chars().rev().collect()).collect())
            .collect();
        let merged = merge_backtranslations(&job_outputs, &originals, &direction).unwrap();
        assert_eq!(merged.len(), 25);
        for (p, original) in merged.iter().zip(&originals) {
            assert_eq!(&p.target_text, original);
            assert_eq!(p.source_text, original.chars().rev().collect::<String>());
            assert_eq!(p.source_lang, LangTag::De);
            assert_eq!(p.target_lang, LangTag::Hsb);
        }
        assert!(matches!(
            merge_backtranslations(&job_outputs[..1], &originals, &direction),
            Err(AssemblyError::MergeMismatch { .. })
        ));
    }
}
