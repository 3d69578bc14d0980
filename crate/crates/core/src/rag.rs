//! Retrieval-augmented QA context construction: character chunking,
//! subject-routed vector indexes, top-k context retrieval and prompt
//! composition.
//!
//! Offsets are in Unicode scalar values, not bytes; Cyrillic text is
//! multi-byte in UTF-8 and byte slicing would split code points. The two
//! subject indexes are separate containers rather than a filter field, so a
//! routing bug cannot leak chunks across subjects.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError};
use crate::corpus::{Document, LangTag, McqItem, Subject};
use crate::mcq::{render_mcq_prompt, McqError};
use crate::retrieval::{build_index, RetrievalError, VectorIndex};

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("overlap {overlap} must be smaller than size {size}")]
    BadChunkParams { size: usize, overlap: usize },
    #[error("empty document `{0}`")]
    EmptyDocument(String),
    #[error("document `{0}` has no routable subject")]
    UnroutableDocument(String),
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),
    #[error("question `{id}` has subject `none`; cannot route to an index")]
    UnroutableQuestion { id: String },
    #[error("the {0} index is empty")]
    EmptyIndex(Subject),
    #[error("question `{id}` has no text for language {lang}")]
    MissingQuestionText { id: String, lang: LangTag },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] McqError),
}

/// Chunking window: `size` characters per chunk, consecutive chunks sharing
/// `overlap` characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        ChunkParams {
            size: 512,
            overlap: 64,
        }
    }
}

impl ChunkParams {
    pub fn new(size: usize, overlap: usize) -> Result<Self, RagError> {
        let params = ChunkParams { size, overlap };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), RagError> {
        if self.size == 0 || self.overlap >= self.size {
            return Err(RagError::BadChunkParams {
                size: self.size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    /// Distance between consecutive chunk starts.
    pub fn stride(&self) -> usize {
        self.size - self.overlap
    }
}

/// A character-window slice of a document: `[start, end)` offsets in Unicode
/// scalar values, the sliced text and the routing subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub subject: Subject,
}

impl Chunk {
    /// Index key: `doc_id:start`.
    pub fn key(&self) -> String {
        format!("{}:{}", self.doc_id, self.start)
    }
}

/// Slice a document into overlapping character windows. Chunks start at
/// offsets 0, s, 2s, … with stride `s = size − overlap`; each spans
/// `min(size, remaining)` characters; every character of the document is
/// covered.
pub fn chunk_document(doc: &Document, params: &ChunkParams) -> Result<Vec<Chunk>, RagError> {
    params.validate()?;
    if doc.text.is_empty() {
        return Err(RagError::EmptyDocument(doc.doc_id.clone()));
    }
    // byte offset of every char plus the terminal byte length, so char
    // windows can slice the original string without re-walking it
    let byte_at: Vec<usize> = doc
        .text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(doc.text.len()))
        .collect();
    let n_chars = byte_at.len() - 1;

    let stride = params.stride();
    let mut chunks = Vec::new();
    let mut start = 0usize;
    loop {
        let end = (start + params.size).min(n_chars);
        chunks.push(Chunk {
            doc_id: doc.doc_id.clone(),
            start,
            end,
            text: doc.text[byte_at[start]..byte_at[end]].to_string(),
            subject: doc.subject,
        });
        if end == n_chars {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

/// The two routing indexes. Disjoint by doc_id set by construction.
#[derive(Debug)]
pub struct SubjectIndexes {
    pub history: VectorIndex,
    pub language_literature: VectorIndex,
}

impl SubjectIndexes {
    /// The index for a subject; `none` does not route.
    pub fn routed(&self, subject: Subject) -> Option<&VectorIndex> {
        match subject {
            Subject::History => Some(&self.history),
            Subject::LanguageLiterature => Some(&self.language_literature),
            Subject::None => None,
        }
    }
}

/// Chunk every document and insert each chunk, embedded, into the index
/// matching its document's subject. Chunk key is `doc_id:start`; the payload
/// carries the full chunk record.
pub fn build_subject_indexes(
    docs: &[Document],
    params: &ChunkParams,
    backend: &dyn Backend,
) -> Result<SubjectIndexes, RagError> {
    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut history_items = Vec::new();
    let mut liter_items = Vec::new();
    for doc in docs {
        if !seen_ids.insert(doc.doc_id.as_str()) {
            return Err(RagError::DuplicateDocId(doc.doc_id.clone()));
        }
        let bucket = match doc.subject {
            Subject::History => &mut history_items,
            Subject::LanguageLiterature => &mut liter_items,
            Subject::None => return Err(RagError::UnroutableDocument(doc.doc_id.clone())),
        };
        for chunk in chunk_document(doc, params)? {
            bucket.push((
                chunk.key(),
                chunk.text.clone(),
                serde_json::to_value(&chunk).expect("chunk serializes"),
            ));
        }
    }
    let build = |items: &Vec<(String, String, serde_json::Value)>| -> Result<VectorIndex, RagError> {
        if items.is_empty() {
            return Ok(VectorIndex::new(backend.embedding_dims(), backend.name()));
        }
        Ok(build_index(items, backend)?)
    };
    Ok(SubjectIndexes {
        history: build(&history_items)?,
        language_literature: build(&liter_items)?,
    })
}

/// Retrieve the `k` most relevant chunks for a free question text from one
/// subject's index, descending similarity.
pub fn retrieve_context_text(
    question_text: &str,
    subject: Subject,
    question_id: &str,
    indexes: &SubjectIndexes,
    k: usize,
    backend: &dyn Backend,
) -> Result<Vec<Chunk>, RagError> {
    let index = indexes
        .routed(subject)
        .ok_or_else(|| RagError::UnroutableQuestion {
            id: question_id.to_string(),
        })?;
    if index.is_empty() {
        return Err(RagError::EmptyIndex(subject));
    }
    let query = backend.embed(&[question_text.to_string()])?.remove(0);
    let neighbors = index.topk(&query, k)?;
    Ok(neighbors
        .into_iter()
        .map(|n| serde_json::from_value(n.payload).expect("chunk payload roundtrips"))
        .collect())
}

/// Retrieve context chunks for an MCQ item: the question text in `lang` is
/// embedded (options excluded) and searched in the index routed by the item's
/// subject.
pub fn retrieve_context(
    item: &McqItem,
    lang: LangTag,
    indexes: &SubjectIndexes,
    k: usize,
    backend: &dyn Backend,
) -> Result<Vec<Chunk>, RagError> {
    let question = item
        .question_by_lang
        .get(&lang)
        .ok_or_else(|| RagError::MissingQuestionText {
            id: item.id.clone(),
            lang,
        })?;
    retrieve_context_text(question, item.subject, &item.id, indexes, k, backend)
}

/// Join retrieved chunk texts with blank lines and render the standard MCQ
/// prompt with that text as the `context_lang` context block.
pub fn render_rag_prompt(
    chunks: &[Chunk],
    item: &McqItem,
    order: &[usize],
    langs: &[LangTag],
    context_lang: LangTag,
) -> Result<String, RagError> {
    if chunks.is_empty() {
        return Err(RagError::EmptyIndex(item.subject));
    }
    let context: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let mut with_context = item.clone();
    with_context
        .context_by_lang
        .insert(context_lang, context.join("\n\n"));
    Ok(render_mcq_prompt(&with_context, order, langs)?)
}
