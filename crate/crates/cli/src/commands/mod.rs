//! Subcommand implementations.

pub mod assemble;
pub mod check;
pub mod ingest;
pub mod mt;
pub mod qa;
pub mod rag;
pub mod score;
pub mod select;

use std::path::{Path, PathBuf};

use serde::Serialize;

use slavkit_core::corpus::{self, LangTag, McqItem, ParallelPair};

use crate::errors::CliError;

/// Rejection report location for a command writing `out`.
pub fn rejects_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".rejects.jsonl");
    PathBuf::from(s)
}

/// Load a parallel file, treating any rejected line as fatal: the report is
/// written, its path printed, and the command exits with a data error.
pub fn load_pairs_strict(
    path: &Path,
    src: LangTag,
    tgt: LangTag,
    rejects_path: &Path,
) -> Result<Vec<ParallelPair>, CliError> {
    let outcome = corpus::load_parallel(path, src, tgt)?;
    if !outcome.is_clean() {
        outcome.write_rejects(rejects_path)?;
        println!("rejection report: {}", rejects_path.display());
        return Err(CliError::Data(format!(
            "{} invalid lines in {}",
            outcome.rejects.len(),
            path.display()
        )));
    }
    Ok(outcome.records)
}

/// Load an MCQ file with the same strictness as [`load_pairs_strict`].
pub fn load_mcq_strict(path: &Path, rejects_path: &Path) -> Result<Vec<McqItem>, CliError> {
    let outcome = corpus::load_mcq(path)?;
    if !outcome.is_clean() {
        outcome.write_rejects(rejects_path)?;
        println!("rejection report: {}", rejects_path.display());
        return Err(CliError::Data(format!(
            "{} invalid items in {}",
            outcome.rejects.len(),
            path.display()
        )));
    }
    Ok(outcome.records)
}

/// Parse a comma-separated language list, e.g. `en,dsb`.
pub fn parse_langs(spec: &str) -> Result<Vec<LangTag>, CliError> {
    let langs: Result<Vec<LangTag>, _> = spec.split(',').map(|s| s.trim().parse()).collect();
    let langs = langs.map_err(|e| CliError::Usage(format!("bad --langs: {e}")))?;
    if langs.is_empty() {
        return Err(CliError::Usage("empty --langs".into()));
    }
    Ok(langs)
}

/// Serialize records as JSON-Lines bytes.
pub fn jsonl_bytes<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    buf
}

/// Serialize pairs in the format implied by the output extension: `.jsonl`
/// gives full pair records, anything else the two-column TSV.
pub fn pairs_bytes(pairs: &[ParallelPair], out: &Path) -> Vec<u8> {
    if out.extension().is_some_and(|e| e == "jsonl") {
        jsonl_bytes(pairs)
    } else {
        let mut buf = Vec::new();
        for p in pairs {
            buf.extend_from_slice(p.source_text.as_bytes());
            buf.push(b'\t');
            buf.extend_from_slice(p.target_text.as_bytes());
            buf.push(b'\n');
        }
        buf
    }
}
