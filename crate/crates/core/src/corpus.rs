//! Canonical data model and ingestion for parallel corpora, MCQ datasets and
//! RAG documents.
//!
//! Loaders are tolerant: malformed records never abort a load, they accumulate
//! in a machine-readable rejection report (`{"line","reason"}` JSON-Lines) so
//! large noisy corpora survive ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Errors raised by corpus loading and validation.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown language tag `{0}`")]
    UnknownLang(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Language identifier. Only these six codes are valid; comparisons are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LangTag {
    Uk,
    Cs,
    En,
    De,
    Dsb,
    Hsb,
}

impl LangTag {
    /// Lowercase wire code, e.g. `"hsb"`.
    pub fn code(self) -> &'static str {
        match self {
            LangTag::Uk => "uk",
            LangTag::Cs => "cs",
            LangTag::En => "en",
            LangTag::De => "de",
            LangTag::Dsb => "dsb",
            LangTag::Hsb => "hsb",
        }
    }

    /// English display name used in MT instructions.
    pub fn display_name(self) -> &'static str {
        match self {
            LangTag::Uk => "Ukrainian",
            LangTag::Cs => "Czech",
            LangTag::En => "English",
            LangTag::De => "German",
            LangTag::Dsb => "Lower Sorbian",
            LangTag::Hsb => "Upper Sorbian",
        }
    }
}

impl FromStr for LangTag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uk" => Ok(LangTag::Uk),
            "cs" => Ok(LangTag::Cs),
            "en" => Ok(LangTag::En),
            "de" => Ok(LangTag::De),
            "dsb" => Ok(LangTag::Dsb),
            "hsb" => Ok(LangTag::Hsb),
            other => Err(CorpusError::UnknownLang(other.to_string())),
        }
    }
}

impl fmt::Display for LangTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Subject routing class for MCQ items and RAG documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    History,
    LanguageLiterature,
    None,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subject::History => "history",
            Subject::LanguageLiterature => "language_literature",
            Subject::None => "none",
        })
    }
}

impl FromStr for Subject {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "history" => Ok(Subject::History),
            "language_literature" => Ok(Subject::LanguageLiterature),
            "none" => Ok(Subject::None),
            other => Err(CorpusError::InvalidRecord(format!(
                "unknown subject `{other}`"
            ))),
        }
    }
}

/// CEFR difficulty level of an MCQ item. Items without a level carry `None`
/// explicitly rather than an absent field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CefrLevel {
    A1,
    A2,
    B1,
    B2,
    C1,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for CefrLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CefrLevel::A1 => "A1",
            CefrLevel::A2 => "A2",
            CefrLevel::B1 => "B1",
            CefrLevel::B2 => "B2",
            CefrLevel::C1 => "C1",
            CefrLevel::None => "none",
        })
    }
}

/// One aligned (source, target) sentence pair; the unit of all MT data.
///
/// Texts are stored stripped of leading/trailing whitespace and are never
/// empty; source and target language always differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub source_text: String,
    pub target_text: String,
    pub source_lang: LangTag,
    pub target_lang: LangTag,
    /// Free-form provenance, e.g. a file name or dataset label.
    pub origin: String,
}

impl ParallelPair {
    pub fn new(
        source_text: &str,
        target_text: &str,
        source_lang: LangTag,
        target_lang: LangTag,
        origin: &str,
    ) -> Result<Self, CorpusError> {
        let source_text = source_text.trim();
        let target_text = target_text.trim();
        if source_text.is_empty() {
            return Err(CorpusError::InvalidRecord("empty source text".into()));
        }
        if target_text.is_empty() {
            return Err(CorpusError::InvalidRecord("empty target text".into()));
        }
        if source_lang == target_lang {
            return Err(CorpusError::InvalidRecord(format!(
                "source and target language are both {source_lang}"
            )));
        }
        Ok(ParallelPair {
            source_text: source_text.to_string(),
            target_text: target_text.to_string(),
            source_lang,
            target_lang,
            origin: origin.to_string(),
        })
    }

    /// Deduplication key: the exact (source, target) pair. No case folding or
    /// Unicode normalization — aggressive normalization could merge genuinely
    /// distinct diacritic variants.
    pub fn dedup_key(&self) -> (&str, &str) {
        (&self.source_text, &self.target_text)
    }
}

/// One labeled answer option with per-language texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqOption {
    pub label: String,
    #[serde(rename = "text")]
    pub text_by_lang: BTreeMap<LangTag, String>,
}

/// A multiple-choice question with optional context, per-language texts,
/// labeled options and a gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub subject: Subject,
    pub level: CefrLevel,
    #[serde(rename = "context", default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context_by_lang: BTreeMap<LangTag, String>,
    #[serde(rename = "question")]
    pub question_by_lang: BTreeMap<LangTag, String>,
    pub options: Vec<McqOption>,
    #[serde(rename = "gold")]
    pub gold_label: String,
}

/// Inclusive bounds on the number of answer options.
pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 16;

impl McqItem {
    /// Validate the item invariants; returns the violation reason on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        let n = self.options.len();
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n) {
            return Err(format!("option count {n} outside {MIN_OPTIONS}..={MAX_OPTIONS}"));
        }
        let mut labels = HashSet::new();
        for opt in &self.options {
            if opt.label.is_empty() {
                return Err("empty option label".into());
            }
            if !labels.insert(opt.label.as_str()) {
                return Err(format!("duplicate option label `{}`", opt.label));
            }
        }
        if !labels.contains(self.gold_label.as_str()) {
            return Err(format!("gold not in options: `{}`", self.gold_label));
        }
        if self.question_by_lang.is_empty() {
            return Err("no question text in any language".into());
        }
        Ok(())
    }

    /// Index of the gold option. Valid items always have one.
    pub fn gold_index(&self) -> Option<usize> {
        self.options.iter().position(|o| o.label == self.gold_label)
    }
}

/// A source document for RAG, character-indexed; subject must be one of the
/// two routing classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub subject: Subject,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: &str, subject: Subject, text: &str) -> Result<Self, CorpusError> {
        if doc_id.is_empty() {
            return Err(CorpusError::InvalidRecord("empty doc_id".into()));
        }
        if text.is_empty() {
            return Err(CorpusError::InvalidRecord(format!("document {doc_id}: empty text")));
        }
        if subject == Subject::None {
            return Err(CorpusError::InvalidRecord(format!(
                "document {doc_id}: subject must be history or language_literature"
            )));
        }
        Ok(Document {
            doc_id: doc_id.to_string(),
            subject,
            text: text.to_string(),
        })
    }
}

/// One rejected input line: 1-based line number plus the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

/// Result of a tolerant load: accepted records in file order plus rejects.
#[derive(Debug, Clone)]
pub struct LoadOutcome<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
}

impl<T> LoadOutcome<T> {
    pub fn is_clean(&self) -> bool {
        self.rejects.is_empty()
    }

    /// Write the rejection report as JSON-Lines of `{"line","reason"}`.
    pub fn write_rejects(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = Vec::new();
        for r in &self.rejects {
            serde_json::to_writer(&mut out, r).expect("reject serializes");
            out.push(b'\n');
        }
        fs::write(path, out).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(BufReader::new(file).lines())
}

#[derive(Deserialize)]
struct JsonPairRecord {
    src: String,
    tgt: String,
}

/// Load a parallel corpus from a tab-separated (`source<TAB>target`) or
/// JSON-Lines (`{"src","tgt"}`) file. The format is chosen by extension:
/// `.jsonl` is JSON-Lines, anything else is TSV.
///
/// Invalid lines (wrong field count, empty side) are collected as rejects
/// with their 1-based line numbers; they never abort the load.
pub fn load_parallel(
    path: &Path,
    src: LangTag,
    tgt: LangTag,
) -> Result<LoadOutcome<ParallelPair>, CorpusError> {
    let jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let origin = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<(String, String), String> = if jsonl {
            serde_json::from_str::<JsonPairRecord>(&line)
                .map(|r| (r.src, r.tgt))
                .map_err(|e| format!("invalid json: {e}"))
        } else {
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(t), None) => Ok((s.to_string(), t.to_string())),
                _ => Err("expected exactly 2 tab-separated fields".into()),
            }
        };
        match parsed.and_then(|(s, t)| {
            ParallelPair::new(&s, &t, src, tgt, &origin).map_err(|e| e.to_string())
        }) {
            Ok(pair) => records.push(pair),
            Err(reason) => rejects.push(Reject { line: lineno, reason }),
        }
    }
    Ok(LoadOutcome { records, rejects })
}

/// Keep exactly one representative per distinct (source, target) key; the
/// first occurrence wins and the relative order of survivors is preserved.
pub fn dedup_pairs(pairs: Vec<ParallelPair>) -> Vec<ParallelPair> {
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(pairs.len());
    pairs
        .into_iter()
        .filter(|p| {
            let (s, t) = p.dedup_key();
            seen.insert((s.to_string(), t.to_string()))
        })
        .collect()
}

/// Load MCQ items from a JSON-Lines file, validating every record against the
/// item invariants. Violations (bad option count, gold not among options,
/// duplicate id, malformed JSON) become rejects.
pub fn load_mcq(path: &Path) -> Result<LoadOutcome<McqItem>, CorpusError> {
    let mut records: Vec<McqItem> = Vec::new();
    let mut rejects = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item: McqItem = match serde_json::from_str(&line) {
            Ok(item) => item,
            Err(e) => {
                rejects.push(Reject {
                    line: lineno,
                    reason: format!("invalid json: {e}"),
                });
                continue;
            }
        };
        if let Err(reason) = item.validate() {
            rejects.push(Reject { line: lineno, reason });
            continue;
        }
        if !seen_ids.insert(item.id.clone()) {
            rejects.push(Reject {
                line: lineno,
                reason: format!("duplicate id `{}`", item.id),
            });
            continue;
        }
        records.push(item);
    }
    Ok(LoadOutcome { records, rejects })
}

/// Serialize records as JSON-Lines, one object per line, in order.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Serialize pairs as `source<TAB>target` lines (UTF-8, LF).
pub fn write_parallel_tsv(path: &Path, pairs: &[ParallelPair]) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    for p in pairs {
        writeln!(w, "{}\t{}", p.source_text, p.target_text).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
