//! Embedding-based similarity search: exact cosine top-k over an in-memory
//! index, similarity-based training-data selection, and persistence for
//! indexes and embedding caches.
//!
//! Search is exhaustive by design — pool sizes here are desk-scale and
//! exactness is what makes the brute-force oracle tests possible. An
//! approximate backend can be added later behind the same contract.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, BackendError, EmbeddingVector};
use crate::corpus::{dedup_pairs, ParallelPair};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("duplicate index key `{0}`")]
    DuplicateKey(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt index file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("stale checkpoint: {0}")]
    StaleCheckpoint(String),
}

/// Cosine similarity, accumulated in f64. Both vectors must share dims and
/// have nonzero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dims() != b.dims() {
        return Err(RetrievalError::DimMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroNorm);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// One indexed entry: unique key, vector and an opaque payload record.
#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub key: String,
    pub vector: EmbeddingVector,
    pub payload: serde_json::Value,
}

/// An exact-search index over fixed-dimension vectors; immutable once built
/// and safe to share across threads.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dims: usize,
    backend_name: String,
    entries: Vec<IndexEntry>,
    keys: HashSet<String>,
}

/// A search hit: entry key, cosine similarity and the entry payload, sorted
/// by similarity descending.
#[derive(Debug, Clone, Serialize)]
pub struct Neighbor {
    pub key: String,
    pub similarity: f64,
    pub payload: serde_json::Value,
}

impl VectorIndex {
    pub fn new(dims: usize, backend_name: &str) -> Self {
        VectorIndex {
            dims,
            backend_name: backend_name.to_string(),
            entries: Vec::new(),
            keys: HashSet::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn backend_name(&self) -> &str {
        &self.backend_name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn insert(
        &mut self,
        key: &str,
        vector: EmbeddingVector,
        payload: serde_json::Value,
    ) -> Result<(), RetrievalError> {
        if vector.dims() != self.dims {
            return Err(RetrievalError::DimMismatch {
                left: vector.dims(),
                right: self.dims,
            });
        }
        if !self.keys.insert(key.to_string()) {
            return Err(RetrievalError::DuplicateKey(key.to_string()));
        }
        self.entries.push(IndexEntry {
            key: key.to_string(),
            vector,
            payload,
        });
        Ok(())
    }

    /// The `min(k, len)` nearest entries by cosine similarity, descending;
    /// ties break by ascending insertion order. Read-only: repeat queries
    /// give identical results.
    pub fn topk(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::EmptyInput("k must be >= 1"));
        }
        let mut scored: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            scored.push((i, cosine(query, &e.vector)?));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("similarities are finite")
                .then(a.0.cmp(&b.0))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, sim)| Neighbor {
                key: self.entries[i].key.clone(),
                similarity: sim,
                payload: self.entries[i].payload.clone(),
            })
            .collect())
    }
}

/// Embed texts in fixed-size batches; order preserved. Keeps single requests
/// bounded without changing results.
pub fn embed_in_batches(
    backend: &dyn Backend,
    texts: &[String],
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>, BackendError> {
    let batch = batch_size.max(1);
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(batch) {
        out.extend(backend.embed(chunk)?);
    }
    Ok(out)
}

/// Build an index over `(id, text, payload)` items; one entry per item,
/// insertion order preserved, embeddings via the backend.
pub fn build_index(
    items: &[(String, String, serde_json::Value)],
    backend: &dyn Backend,
) -> Result<VectorIndex, RetrievalError> {
    if items.is_empty() {
        return Err(RetrievalError::EmptyInput("no items to index"));
    }
    let mut seen = HashSet::new();
    for (id, _, _) in items {
        if !seen.insert(id.as_str()) {
            return Err(RetrievalError::DuplicateKey(id.clone()));
        }
    }
    let texts: Vec<String> = items.iter().map(|(_, t, _)| t.clone()).collect();
    let vectors = embed_in_batches(backend, &texts, 64)?;
    let mut index = VectorIndex::new(backend.embedding_dims(), backend.name());
    for ((id, _, payload), vector) in items.iter().zip(vectors) {
        index.insert(id, vector, payload.clone())?;
    }
    Ok(index)
}

/// For each reference target sentence, retrieve the `k` nearest pool pairs by
/// target-side embedding and take their full pairs; aggregate over all
/// references, deduplicated, in first-retrieval order.
pub fn select_training_pairs(
    reference_targets: &[String],
    pool: &[ParallelPair],
    k: usize,
    backend: &dyn Backend,
) -> Result<Vec<ParallelPair>, RetrievalError> {
    let positions = select_pool_positions(reference_targets, pool, k, backend, None)?;
    Ok(dedup_pairs(positions.into_iter().map(|i| pool[i].clone()).collect()))
}

/// Resumable variant of [`select_training_pairs`]: progress is checkpointed
/// to `state_path` every `checkpoint_every` references and picked up on the
/// next call after a failure. The state file is removed on success.
pub fn select_training_pairs_resumable(
    reference_targets: &[String],
    pool: &[ParallelPair],
    k: usize,
    backend: &dyn Backend,
    state_path: &Path,
    checkpoint_every: usize,
) -> Result<Vec<ParallelPair>, RetrievalError> {
    let positions = select_pool_positions(
        reference_targets,
        pool,
        k,
        backend,
        Some((state_path, checkpoint_every)),
    )?;
    Ok(dedup_pairs(positions.into_iter().map(|i| pool[i].clone()).collect()))
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionCheckpoint {
    fingerprint: String,
    next_reference: usize,
    selected_positions: Vec<usize>,
}

fn selection_fingerprint(
    reference_targets: &[String],
    pool: &[ParallelPair],
    k: usize,
    backend: &dyn Backend,
) -> String {
    let mut h = Sha256::new();
    h.update(backend.name().as_bytes());
    h.update((backend.embedding_dims() as u64).to_le_bytes());
    h.update((k as u64).to_le_bytes());
    h.update((pool.len() as u64).to_le_bytes());
    h.update((reference_targets.len() as u64).to_le_bytes());
    for p in pool {
        h.update(p.target_text.as_bytes());
        h.update([0u8]);
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn select_pool_positions(
    reference_targets: &[String],
    pool: &[ParallelPair],
    k: usize,
    backend: &dyn Backend,
    resume: Option<(&Path, usize)>,
) -> Result<Vec<usize>, RetrievalError> {
    if pool.is_empty() {
        return Err(RetrievalError::EmptyInput("empty pool"));
    }
    if reference_targets.is_empty() {
        return Err(RetrievalError::EmptyInput("no reference targets"));
    }
    if k == 0 {
        return Err(RetrievalError::EmptyInput("k must be >= 1"));
    }

    let items: Vec<(String, String, serde_json::Value)> = pool
        .iter()
        .enumerate()
        .map(|(i, p)| (i.to_string(), p.target_text.clone(), serde_json::json!(i)))
        .collect();
    let index = build_index(&items, backend)?;

    let fingerprint = resume
        .map(|_| selection_fingerprint(reference_targets, pool, k, backend))
        .unwrap_or_default();
    let mut start = 0usize;
    let mut positions: Vec<usize> = Vec::new();
    if let Some((state_path, _)) = resume {
        if state_path.exists() {
            let raw = fs::read_to_string(state_path).map_err(io_err(state_path))?;
            let cp: SelectionCheckpoint =
                serde_json::from_str(&raw).map_err(|e| RetrievalError::Corrupt {
                    path: state_path.display().to_string(),
                    reason: e.to_string(),
                })?;
            if cp.fingerprint != fingerprint {
                return Err(RetrievalError::StaleCheckpoint(format!(
                    "{} was written for different inputs; delete it to restart",
                    state_path.display()
                )));
            }
            start = cp.next_reference;
            positions = cp.selected_positions;
        }
    }

    for (i, reference) in reference_targets.iter().enumerate().skip(start) {
        if let Some((state_path, every)) = resume {
            if i > start && (i - start).is_multiple_of(every.max(1)) {
                write_checkpoint(state_path, &fingerprint, i, &positions)?;
            }
        }
        let query = match backend.embed(std::slice::from_ref(reference)) {
            Ok(mut v) => v.remove(0),
            Err(e) => {
                // persist progress before propagating so the run can resume
                if let Some((state_path, _)) = resume {
                    write_checkpoint(state_path, &fingerprint, i, &positions)?;
                }
                return Err(e.into());
            }
        };
        for n in index.topk(&query, k)? {
            positions.push(n.payload.as_u64().expect("position payload") as usize);
        }
    }

    if let Some((state_path, _)) = resume {
        let _ = fs::remove_file(state_path);
    }
    Ok(positions)
}

fn write_checkpoint(
    path: &Path,
    fingerprint: &str,
    next_reference: usize,
    positions: &[usize],
) -> Result<(), RetrievalError> {
    let cp = SelectionCheckpoint {
        fingerprint: fingerprint.to_string(),
        next_reference,
        selected_positions: positions.to_vec(),
    };
    let body = serde_json::to_vec(&cp).expect("checkpoint serializes");
    fs::write(path, body).map_err(io_err(path))
}

// ── persistence ──────────────────────────────────────────────────────────
//
// Index file layout: one JSON header line `{dims, count, metric,
// backend_name}` terminated by '\n', then `dims * count` little-endian f32
// values. Keys and payloads live in a JSON-Lines sidecar at `<path>.jsonl`,
// one `{key, payload}` object per entry, in entry order.

#[derive(Debug, Serialize, Deserialize)]
struct IndexHeader {
    dims: usize,
    count: usize,
    metric: String,
    backend_name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarRecord {
    key: String,
    payload: serde_json::Value,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".jsonl");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RetrievalError + '_ {
    move |e| RetrievalError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Persist an index (header + raw vectors, plus the `{key, payload}` sidecar).
pub fn save_index(index: &VectorIndex, path: &Path) -> Result<(), RetrievalError> {
    let header = IndexHeader {
        dims: index.dims,
        count: index.entries.len(),
        metric: "cosine".to_string(),
        backend_name: index.backend_name.clone(),
    };
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    let mut head = serde_json::to_vec(&header).expect("header serializes");
    head.push(b'\n');
    w.write_all(&head).map_err(io_err(path))?;
    for e in &index.entries {
        for v in &e.vector.values {
            w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;

    let side = sidecar_path(path);
    let mut buf = Vec::new();
    for e in &index.entries {
        let rec = SidecarRecord {
            key: e.key.clone(),
            payload: e.payload.clone(),
        };
        serde_json::to_writer(&mut buf, &rec).expect("sidecar record serializes");
        buf.push(b'\n');
    }
    fs::write(&side, buf).map_err(io_err(&side))
}

/// Load an index persisted by [`save_index`].
pub fn load_index(path: &Path) -> Result<VectorIndex, RetrievalError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut header_line = String::new();
    reader.read_line(&mut header_line).map_err(io_err(path))?;
    let header: IndexHeader =
        serde_json::from_str(header_line.trim_end()).map_err(|e| RetrievalError::Corrupt {
            path: path.display().to_string(),
            reason: format!("bad header: {e}"),
        })?;

    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(io_err(path))?;
    let expected = header.dims * header.count * 4;
    if raw.len() != expected {
        return Err(RetrievalError::Corrupt {
            path: path.display().to_string(),
            reason: format!("expected {expected} vector bytes, found {}", raw.len()),
        });
    }

    let side = sidecar_path(path);
    let sidecar = fs::File::open(&side).map_err(io_err(&side))?;
    let mut index = VectorIndex::new(header.dims, &header.backend_name);
    let mut offset = 0usize;
    let mut n = 0usize;
    for line in BufReader::new(sidecar).lines() {
        let line = line.map_err(io_err(&side))?;
        if line.trim().is_empty() {
            continue;
        }
        if n == header.count {
            return Err(RetrievalError::Corrupt {
                path: side.display().to_string(),
                reason: format!("more sidecar records than header count {}", header.count),
            });
        }
        let rec: SidecarRecord =
            serde_json::from_str(&line).map_err(|e| RetrievalError::Corrupt {
                path: side.display().to_string(),
                reason: e.to_string(),
            })?;
        let mut values = Vec::with_capacity(header.dims);
        for _ in 0..header.dims {
            values.push(f32::from_le_bytes(raw[offset..offset + 4].try_into().unwrap()));
            offset += 4;
        }
        let vector = EmbeddingVector::new(values);
        if !vector.is_finite() {
            return Err(RetrievalError::Corrupt {
                path: path.display().to_string(),
                reason: format!("non-finite vector values for key `{}`", rec.key),
            });
        }
        index.insert(&rec.key, vector, rec.payload)?;
        n += 1;
    }
    if n != header.count {
        return Err(RetrievalError::Corrupt {
            path: side.display().to_string(),
            reason: format!("header count {} but sidecar has {n} records", header.count),
        });
    }
    Ok(index)
}

/// On-disk embedding cache keyed by (backend name, sha256 of text); stored in
/// the index file layout with the text hash as the entry key.
#[derive(Debug)]
pub struct EmbeddingCache {
    path: PathBuf,
    backend_name: String,
    dims: usize,
    map: HashMap<String, EmbeddingVector>,
    dirty: bool,
}

impl EmbeddingCache {
    /// Open a cache file, creating an empty cache when the file is absent.
    /// A cache written by a different backend name or dims is rejected.
    pub fn open(path: &Path, backend: &dyn Backend) -> Result<Self, RetrievalError> {
        let mut cache = EmbeddingCache {
            path: path.to_path_buf(),
            backend_name: backend.name().to_string(),
            dims: backend.embedding_dims(),
            map: HashMap::new(),
            dirty: false,
        };
        if path.exists() {
            let index = load_index(path)?;
            if index.backend_name() != cache.backend_name || index.dims() != cache.dims {
                return Err(RetrievalError::Corrupt {
                    path: path.display().to_string(),
                    reason: format!(
                        "cache was written by backend `{}` dims {}, current is `{}` dims {}",
                        index.backend_name(),
                        index.dims(),
                        cache.backend_name,
                        cache.dims
                    ),
                });
            }
            for e in index.entries() {
                cache.map.insert(e.key.clone(), e.vector.clone());
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn text_key(text: &str) -> String {
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Embed texts through the cache: only texts missing from the cache hit
    /// the backend. Returns vectors in input order.
    pub fn embed(
        &mut self,
        backend: &dyn Backend,
        texts: &[String],
    ) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let keys: Vec<String> = texts.iter().map(|t| Self::text_key(t)).collect();
        let mut missing: Vec<String> = Vec::new();
        let mut missing_keys: Vec<String> = Vec::new();
        let mut queued: HashSet<&str> = HashSet::new();
        for (t, k) in texts.iter().zip(&keys) {
            if !self.map.contains_key(k) && queued.insert(k.as_str()) {
                missing.push(t.clone());
                missing_keys.push(k.clone());
            }
        }
        if !missing.is_empty() {
            let vectors = embed_in_batches(backend, &missing, 64)?;
            for (k, v) in missing_keys.into_iter().zip(vectors) {
                self.map.insert(k, v);
                self.dirty = true;
            }
        }
        Ok(keys
            .iter()
            .map(|k| self.map.get(k).expect("just filled").clone())
            .collect())
    }

    /// Persist the cache when it changed since open/last save. Entries are
    /// sorted by key so saves are reproducible.
    pub fn save(&mut self) -> Result<(), RetrievalError> {
        if !self.dirty {
            return Ok(());
        }
        let mut index = VectorIndex::new(self.dims, &self.backend_name);
        let mut keys: Vec<&String> = self.map.keys().collect();
        keys.sort();
        for k in keys {
            index.insert(k, self.map[k].clone(), serde_json::Value::Null)?;
        }
        save_index(&index, &self.path)?;
        self.dirty = false;
        Ok(())
    }
}

/// A backend wrapper that serves `embed` through an on-disk
/// [`EmbeddingCache`]; probing and generation pass straight through. Call
/// [`CachingBackend::save`] when done to persist newly computed vectors.
pub struct CachingBackend {
    inner: std::sync::Arc<dyn Backend>,
    cache: std::sync::Mutex<EmbeddingCache>,
}

impl CachingBackend {
    pub fn open(
        inner: std::sync::Arc<dyn Backend>,
        cache_path: &Path,
    ) -> Result<Self, RetrievalError> {
        let cache = EmbeddingCache::open(cache_path, inner.as_ref())?;
        Ok(CachingBackend {
            inner,
            cache: std::sync::Mutex::new(cache),
        })
    }

    pub fn save(&self) -> Result<(), RetrievalError> {
        self.cache.lock().expect("cache lock").save()
    }
}

impl Backend for CachingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn embedding_dims(&self) -> usize {
        self.inner.embedding_dims()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        crate::backend::validate_embed_request(texts)?;
        let mut cache = self.cache.lock().expect("cache lock");
        cache
            .embed(self.inner.as_ref(), texts)
            .map_err(|e| match e {
                RetrievalError::Backend(b) => b,
                other => BackendError::Transport(format!("embedding cache: {other}")),
            })
    }

    fn probe_candidates(
        &self,
        probe: &crate::backend::CandidateProbe,
    ) -> Result<crate::backend::CandidateDistribution, BackendError> {
        self.inner.probe_candidates(probe)
    }

    fn generate(
        &self,
        prompt: &str,
        params: &crate::backend::GenerateParams,
    ) -> Result<String, BackendError> {
        self.inner.generate(prompt, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::corpus::LangTag;
    use rand::{Rng, SeedableRng};

    fn vecf(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec())
    }

    #[test]
    fn cosine_self_and_orthogonal() {
        let v = vecf(&[1.0, 2.0, 3.0]);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let a = vecf(&[1.0, 0.0]);
        let b = vecf(&[0.0, 1.0]);
        assert!(cosine(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cosine_matches_independent_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a: Vec<f32> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f32> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dot: f64 = a.iter().zip(&b).map(|(&x, &y)| x as f64 * y as f64).sum();
            let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|&y| (y as f64).powi(2)).sum::<f64>().sqrt();
            let expected = dot / (na * nb);
            let got = cosine(&vecf(&a), &vecf(&b)).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_rejects_mismatch_and_zero() {
        assert!(cosine(&vecf(&[1.0]), &vecf(&[1.0, 2.0])).is_err());
        assert!(cosine(&vecf(&[0.0, 0.0]), &vecf(&[1.0, 2.0])).is_err());
    }

    fn items(texts: &[&str]) -> Vec<(String, String, serde_json::Value)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("id{i}"), t.to_string(), serde_json::json!(i)))
            .collect()
    }

    #[test]
    fn build_index_sizes_and_duplicate_ids() {
        let backend = MockBackend::new(1, 8).unwrap();
        let index = build_index(&items(&["a", "b", "c"]), &backend).unwrap();
        assert_eq!(index.len(), 3);

        let mut dup = items(&["a", "b"]);
        dup[1].0 = "id0".to_string();
        let err = build_index(&dup, &backend).unwrap_err();
        assert!(err.to_string().contains("id0"));
    }

    #[test]
    fn build_index_reproducible_with_seed() {
        let a = build_index(&items(&["x", "y"]), &MockBackend::new(9, 8).unwrap()).unwrap();
        let b = build_index(&items(&["x", "y"]), &MockBackend::new(9, 8).unwrap()).unwrap();
        for (ea, eb) in a.entries().iter().zip(b.entries()) {
            assert_eq!(ea.vector, eb.vector);
        }
    }

    #[test]
    fn topk_self_retrieval_first() {
        let backend = MockBackend::new(2, 8).unwrap();
        let index = build_index(&items(&["alpha", "beta", "gamma"]), &backend).unwrap();
        let q = backend.embed(&["beta".to_string()]).unwrap().remove(0);
        let hits = index.topk(&q, 2).unwrap();
        assert_eq!(hits[0].key, "id1");
        assert!((hits[0].similarity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn topk_k_larger_than_index() {
        let backend = MockBackend::new(2, 8).unwrap();
        let index = build_index(&items(&["a", "b"]), &backend).unwrap();
        let q = backend.embed(&["q".to_string()]).unwrap().remove(0);
        let hits = index.topk(&q, 10).unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits[0].similarity >= hits[1].similarity);
    }

    #[test]
    fn topk_matches_full_sort_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut index = VectorIndex::new(16, "test");
        let mut vectors = Vec::new();
        for i in 0..50 {
            let v: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0..1.0f32)).collect();
            index
                .insert(&format!("k{i}"), vecf(&v), serde_json::Value::Null)
                .unwrap();
            vectors.push(v);
        }
        let q: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0..1.0f32)).collect();
        let query = vecf(&q);
        let hits = index.topk(&query, 7).unwrap();

        let mut oracle: Vec<(usize, f64)> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (i, cosine(&query, &vecf(v)).unwrap()))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (hit, (oi, osim)) in hits.iter().zip(oracle.iter().take(7)) {
            assert_eq!(hit.key, format!("k{oi}"));
            assert!((hit.similarity - osim).abs() < 1e-12);
        }
    }

    fn pool_pairs(n: usize) -> Vec<ParallelPair> {
        (0..n)
            .map(|i| {
                ParallelPair::new(
                    &format!("src {i}"),
                    &format!("tgt {i}"),
                    LangTag::Cs,
                    LangTag::Uk,
                    "pool",
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn select_training_pairs_self_retrieval() {
        let backend = MockBackend::new(3, 8).unwrap();
        let pool = pool_pairs(5);
        let refs: Vec<String> = pool.iter().map(|p| p.target_text.clone()).collect();
        let out = select_training_pairs(&refs, &pool, 1, &backend).unwrap();
        assert_eq!(out, pool);
    }

    #[test]
    fn select_training_pairs_saturation_equals_dedup_pool() {
        let backend = MockBackend::new(3, 8).unwrap();
        let mut pool = pool_pairs(4);
        pool.push(pool[0].clone()); // duplicate key
        let refs = vec!["anything".to_string(), "else".to_string()];
        let out = select_training_pairs(&refs, &pool, 100, &backend).unwrap();
        let expected = dedup_pairs(pool.clone());
        assert_eq!(out.len(), expected.len());
        let got: HashSet<_> = out.iter().map(|p| p.dedup_key()).collect();
        let want: HashSet<_> = expected.iter().map(|p| p.dedup_key()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn select_training_pairs_matches_exhaustive_oracle() {
        let backend = MockBackend::new(4, 8).unwrap();
        let pool = pool_pairs(40);
        let refs: Vec<String> = (0..10).map(|i| format!("query {i}")).collect();
        let k = 5;
        let out = select_training_pairs(&refs, &pool, k, &backend).unwrap();

        // oracle: brute-force all |refs| x |pool| similarities
        let pool_vecs = backend
            .embed(&pool.iter().map(|p| p.target_text.clone()).collect::<Vec<_>>())
            .unwrap();
        let mut oracle_positions = Vec::new();
        for r in &refs {
            let q = backend.embed(std::slice::from_ref(r)).unwrap().remove(0);
            let mut sims: Vec<(usize, f64)> = pool_vecs
                .iter()
                .enumerate()
                .map(|(i, v)| (i, cosine(&q, v).unwrap()))
                .collect();
            sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            oracle_positions.extend(sims.into_iter().take(k).map(|(i, _)| i));
        }
        let expected =
            dedup_pairs(oracle_positions.into_iter().map(|i| pool[i].clone()).collect());
        assert_eq!(out, expected);
    }

    #[test]
    fn selection_output_subset_and_no_duplicates() {
        let backend = MockBackend::new(6, 8).unwrap();
        let pool = pool_pairs(20);
        let refs: Vec<String> = (0..4).map(|i| format!("r{i}")).collect();
        let out = select_training_pairs(&refs, &pool, 3, &backend).unwrap();
        assert!(out.len() <= refs.len() * 3);
        let keys: HashSet<_> = out.iter().map(|p| p.dedup_key()).collect();
        assert_eq!(keys.len(), out.len());
        for p in &out {
            assert!(pool.contains(p));
        }
    }

    /// Backend whose embed fails once a call budget is exhausted.
    struct FlakyBackend {
        inner: MockBackend,
        budget: std::sync::atomic::AtomicUsize,
    }

    impl FlakyBackend {
        fn new(seed: u64, dims: usize, budget: usize) -> Self {
            FlakyBackend {
                inner: MockBackend::new(seed, dims).unwrap(),
                budget: std::sync::atomic::AtomicUsize::new(budget),
            }
        }
    }

    impl Backend for FlakyBackend {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn embedding_dims(&self) -> usize {
            self.inner.embedding_dims()
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
            use std::sync::atomic::Ordering;
            if self
                .budget
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |b| b.checked_sub(1))
                .is_err()
            {
                return Err(BackendError::Transport("budget exhausted".into()));
            }
            self.inner.embed(texts)
        }
        fn probe_candidates(
            &self,
            probe: &crate::backend::CandidateProbe,
        ) -> Result<crate::backend::CandidateDistribution, BackendError> {
            self.inner.probe_candidates(probe)
        }
        fn generate(
            &self,
            prompt: &str,
            params: &crate::backend::GenerateParams,
        ) -> Result<String, BackendError> {
            self.inner.generate(prompt, params)
        }
    }

    #[test]
    fn selection_resumes_from_checkpoint_after_failure() {
        let dir = tempfile::tempdir().unwrap();
        let state = dir.path().join("select.state.json");
        let pool = pool_pairs(10);
        let refs: Vec<String> = (0..8).map(|i| format!("r{i}")).collect();

        // budget: 1 call for the pool index batch + 5 per-reference calls
        let flaky = FlakyBackend::new(7, 8, 6);
        let err = select_training_pairs_resumable(&refs, &pool, 2, &flaky, &state, 2).unwrap_err();
        assert!(matches!(err, RetrievalError::Backend(BackendError::Transport(_))));
        assert!(state.exists(), "checkpoint written on failure");

        let good = MockBackend::new(7, 8).unwrap();
        let resumed = select_training_pairs_resumable(&refs, &pool, 2, &good, &state, 2).unwrap();
        let clean = select_training_pairs(&refs, &pool, 2, &good).unwrap();
        assert_eq!(resumed, clean);
        assert!(!state.exists(), "checkpoint removed on success");
    }

    #[test]
    fn stale_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let state = dir.path().join("select.state.json");
        let pool = pool_pairs(10);
        let refs: Vec<String> = (0..8).map(|i| format!("r{i}")).collect();
        let flaky = FlakyBackend::new(7, 8, 6);
        let _ = select_training_pairs_resumable(&refs, &pool, 2, &flaky, &state, 2).unwrap_err();

        // different k → different fingerprint
        let good = MockBackend::new(7, 8).unwrap();
        let err = select_training_pairs_resumable(&refs, &pool, 3, &good, &state, 2).unwrap_err();
        assert!(matches!(err, RetrievalError::StaleCheckpoint(_)));
    }

    #[test]
    fn index_roundtrip_through_disk() {
        let backend = MockBackend::new(8, 6).unwrap();
        let index = build_index(&items(&["a", "b", "c"]), &backend).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.idx");
        save_index(&index, &path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(loaded.len(), index.len());
        assert_eq!(loaded.dims(), index.dims());
        assert_eq!(loaded.backend_name(), index.backend_name());
        for (a, b) in index.entries().iter().zip(loaded.entries()) {
            assert_eq!(a.key, b.key);
            assert_eq!(a.vector, b.vector);
            assert_eq!(a.payload, b.payload);
        }
    }

    #[test]
    fn truncated_index_file_is_rejected() {
        let backend = MockBackend::new(8, 6).unwrap();
        let index = build_index(&items(&["a", "b"]), &backend).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx");
        save_index(&index, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_index(&path), Err(RetrievalError::Corrupt { .. })));
    }

    #[test]
    fn embedding_cache_avoids_recomputation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.cache");
        let backend = MockBackend::new(9, 8).unwrap();
        let texts: Vec<String> = vec!["a".into(), "b".into(), "a".into()];
        {
            let mut cache = EmbeddingCache::open(&path, &backend).unwrap();
            let out = cache.embed(&backend, &texts).unwrap();
            assert_eq!(out[0], out[2]);
            cache.save().unwrap();
        }
        // reopen: all hits served from disk, backend with zero budget
        let broke = FlakyBackend::new(9, 8, 0);
        let mut cache = EmbeddingCache::open(&path, &broke).unwrap();
        assert_eq!(cache.len(), 2);
        let out = cache.embed(&broke, &texts).unwrap();
        let direct = backend.embed(&texts).unwrap();
        assert_eq!(out, direct);
    }

    #[test]
    fn caching_backend_serves_embeds_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wrap.cache");
        let texts = vec!["x".to_string(), "y".to_string()];
        let direct = MockBackend::new(31, 8).unwrap().embed(&texts).unwrap();
        {
            let inner = std::sync::Arc::new(MockBackend::new(31, 8).unwrap());
            let caching = CachingBackend::open(inner, &path).unwrap();
            assert_eq!(caching.embed(&texts).unwrap(), direct);
            caching.save().unwrap();
        }
        // zero-budget inner backend: hits must come from the cache file
        let broke = std::sync::Arc::new(FlakyBackend::new(31, 8, 0));
        let caching = CachingBackend::open(broke, &path).unwrap();
        assert_eq!(caching.embed(&texts).unwrap(), direct);
        assert!(caching.embed(&["new".to_string()]).is_err());
    }

    #[test]
    fn repeat_queries_do_not_mutate_index() {
        let backend = MockBackend::new(2, 8).unwrap();
        let index = build_index(&items(&["a", "b", "c", "d"]), &backend).unwrap();
        let q = backend.embed(&["a".to_string()]).unwrap().remove(0);
        let first = index.topk(&q, 3).unwrap();
        for _ in 0..5 {
            let again = index.topk(&q, 3).unwrap();
            for (x, y) in first.iter().zip(&again) {
                assert_eq!(x.key, y.key);
                assert_eq!(x.similarity, y.similarity);
            }
        }
    }
}
