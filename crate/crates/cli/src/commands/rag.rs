//! `slavkit rag` — build subject-routed chunk indexes from a document
//! manifest, and query them.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::Deserialize;

use slavkit_core::corpus::{Document, Subject};
use slavkit_core::rag::{build_subject_indexes, retrieve_context_text, ChunkParams, SubjectIndexes};
use slavkit_core::retrieval::{load_index, save_index, VectorIndex};
use slavkit_http::open_backend;

use crate::artifacts::RunContext;
use crate::commands::jsonl_bytes;
use crate::config::{open_concurrent, resolve_descriptor, BackendArgs, PipelineConfig, Role};
use crate::errors::CliError;

#[derive(Debug, Subcommand)]
pub enum RagCmd {
    /// Chunk and embed manifest documents into the two subject indexes
    Build(BuildArgs),
    /// Retrieve the most relevant chunks for a question
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// JSON manifest: an array of {doc_id, subject, path}
    #[arg(long)]
    pub manifest: PathBuf,
    /// Chunk size in characters
    #[arg(long)]
    pub size: Option<usize>,
    /// Chunk overlap in characters
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Directory receiving history.idx and language_literature.idx
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    doc_id: String,
    subject: Subject,
    path: PathBuf,
}

pub const HISTORY_INDEX: &str = "history.idx";
pub const LITERATURE_INDEX: &str = "language_literature.idx";

fn index_file(dir: &Path, subject: Subject) -> PathBuf {
    match subject {
        Subject::History => dir.join(HISTORY_INDEX),
        _ => dir.join(LITERATURE_INDEX),
    }
}

/// Write an index atomically: temp names, then rename data file and sidecar.
fn save_index_atomic(index: &VectorIndex, path: &Path) -> Result<(), CliError> {
    let tmp = path.with_extension("idx.tmp");
    save_index(index, &tmp)?;
    let sidecar = |p: &Path| {
        let mut s = p.as_os_str().to_owned();
        s.push(".jsonl");
        PathBuf::from(s)
    };
    std::fs::rename(&tmp, path)?;
    std::fs::rename(sidecar(&tmp), sidecar(path))?;
    Ok(())
}

pub fn run_build(args: &BuildArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let size = config.param_usize("chunk_size", args.size, 512);
    let overlap = config.param_usize("chunk_overlap", args.overlap, 64);
    let params = ChunkParams::new(size, overlap)?;
    let descriptor = resolve_descriptor(&args.backend, config, Role::Embedder)?;
    let backend = open_concurrent(&descriptor, config)?;

    let mut ctx = RunContext::new("rag-build");
    ctx.input(&args.manifest)?;
    ctx.param("size", size);
    ctx.param("overlap", overlap);
    ctx.backends(vec![format!(
        "embedder={} dims={}",
        descriptor.name, descriptor.embedding_dims
    )]);

    let manifest_raw = std::fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.manifest.display())))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&manifest_raw)
        .map_err(|e| CliError::Data(format!("bad manifest {}: {e}", args.manifest.display())))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));

    let mut docs = Vec::with_capacity(entries.len());
    for entry in &entries {
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        };
        ctx.input(&path)?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        docs.push(Document::new(&entry.doc_id, entry.subject, &text)?);
    }

    let indexes = build_subject_indexes(&docs, &params, backend.as_ref())?;
    std::fs::create_dir_all(&args.out_dir)?;
    let history_path = index_file(&args.out_dir, Subject::History);
    let literature_path = index_file(&args.out_dir, Subject::LanguageLiterature);
    save_index_atomic(&indexes.history, &history_path)?;
    save_index_atomic(&indexes.language_literature, &literature_path)?;
    ctx.write_manifest_beside(&history_path)?;
    ctx.write_manifest_beside(&literature_path)?;
    println!(
        "rag build: {} docs -> history {} chunks, language_literature {} chunks",
        docs.len(),
        indexes.history.len(),
        indexes.language_literature.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Directory holding the built indexes
    #[arg(long)]
    pub index_dir: PathBuf,
    /// Subject index to search
    #[arg(long)]
    pub subject: Subject,
    /// Question text to embed
    #[arg(long)]
    pub question: String,
    /// Number of chunks to retrieve
    #[arg(long)]
    pub k: Option<usize>,
    /// Write retrieved chunks as JSON-Lines here (otherwise print)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

/// Load both subject indexes, tolerating a missing file as an empty index
/// (queries routed to it still fail, with the routed-empty error).
pub fn load_subject_indexes(dir: &Path, dims: usize, name: &str) -> Result<SubjectIndexes, CliError> {
    let load = |p: PathBuf| -> Result<VectorIndex, CliError> {
        if p.exists() {
            Ok(load_index(&p)?)
        } else {
            Ok(VectorIndex::new(dims, name))
        }
    };
    Ok(SubjectIndexes {
        history: load(index_file(dir, Subject::History))?,
        language_literature: load(index_file(dir, Subject::LanguageLiterature))?,
    })
}

pub fn run_query(args: &QueryArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let k = config.param_usize("k_rag", args.k, 5);
    let descriptor = resolve_descriptor(&args.backend, config, Role::Embedder)?;
    let backend = open_backend(&descriptor)?;
    let indexes = load_subject_indexes(
        &args.index_dir,
        descriptor.embedding_dims,
        &descriptor.name,
    )?;
    let chunks = retrieve_context_text(
        &args.question,
        args.subject,
        "query",
        &indexes,
        k,
        backend.as_ref(),
    )?;
    match &args.out {
        Some(out) => {
            let mut ctx = RunContext::new("rag-query");
            ctx.param("subject", args.subject.to_string());
            ctx.param("k", k);
            ctx.param("question", &args.question);
            ctx.backends(vec![format!(
                "embedder={} dims={}",
                descriptor.name, descriptor.embedding_dims
            )]);
            ctx.write_artifact(out, &jsonl_bytes(&chunks))?;
            println!("retrieved {} chunks -> {}", chunks.len(), out.display());
        }
        None => {
            for c in &chunks {
                println!("{}", serde_json::to_string(c)?);
            }
        }
    }
    Ok(())
}

pub fn run(cmd: &RagCmd, config: &PipelineConfig) -> Result<(), CliError> {
    match cmd {
        RagCmd::Build(a) => run_build(a, config),
        RagCmd::Query(a) => run_query(a, config),
    }
}
