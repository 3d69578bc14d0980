//! The inference-backend contract: embeddings, candidate-token probabilities
//! and generation, defined so the pipeline itself carries no model weights.
//!
//! A backend is anything implementing [`Backend`]; the crate ships a
//! deterministic in-process [`MockBackend`] and the companion HTTP crate
//! exposes the same contract over `POST /v1/embed`, `/v1/probe` and
//! `/v1/generate`.
//!
//! Error kinds are mutually distinguishable: transport failures are
//! retryable, capability and protocol errors are not, and precondition
//! violations are reported before any request leaves the process.

mod mock;

pub use mock::{MockBackend, MOCK_VOCABULARY};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

/// Errors raised by backend operations, distinguishable by kind.
#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    /// Network-level failure; safe to retry.
    #[error("transport error: {0}")]
    Transport(String),
    /// The backend does not implement the requested facility.
    #[error("capability error: {0}")]
    Capability(String),
    /// The backend answered, but the answer violates the protocol
    /// (wrong dimensions, wrong candidate keys, non-finite values).
    #[error("protocol error: {0}")]
    Protocol(String),
    /// The request violates a precondition; nothing was sent.
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    /// Only transport errors are retryable.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// Fixed-dimension real vector from mean-pooled backend hidden states; the
/// unit of all similarity retrieval. Stored as little-endian-persistable f32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm, accumulated in f64.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// A prompt plus the candidate continuations to score (e.g. `" A"`, `" B"`).
///
/// Candidates are whole strings: a backend that tokenizes a candidate into
/// several tokens must return the product of conditional token probabilities
/// for the full candidate string.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateProbe {
    pub prompt: String,
    pub candidates: Vec<String>,
}

impl CandidateProbe {
    pub fn new(prompt: &str, candidates: Vec<String>) -> Result<Self, BackendError> {
        let probe = CandidateProbe {
            prompt: prompt.to_string(),
            candidates,
        };
        probe.validate()?;
        Ok(probe)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        if self.candidates.is_empty() {
            return Err(BackendError::InvalidRequest("no candidates".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if c.is_empty() {
                return Err(BackendError::InvalidRequest("empty candidate".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(BackendError::InvalidRequest(format!(
                    "duplicate candidate `{c}`"
                )));
            }
        }
        Ok(())
    }
}

/// Probability distribution over a probe's candidates, renormalized to sum 1.
/// Absolute mass over the full vocabulary is irrelevant to the argmax, so
/// only relative mass among the candidates is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistribution {
    pub probs: BTreeMap<String, f64>,
}

impl CandidateDistribution {
    /// Build from raw nonnegative scores keyed by candidate; checks the keys
    /// match the probe's candidates exactly and renormalizes to sum 1.
    pub fn from_scores(
        candidates: &[String],
        scores: BTreeMap<String, f64>,
    ) -> Result<Self, BackendError> {
        if scores.len() != candidates.len()
            || !candidates.iter().all(|c| scores.contains_key(c))
        {
            return Err(BackendError::Protocol(format!(
                "distribution keys do not match the {} probe candidates",
                candidates.len()
            )));
        }
        let mut sum = 0.0;
        for (k, &v) in &scores {
            if !v.is_finite() || v < 0.0 {
                return Err(BackendError::Protocol(format!(
                    "non-finite or negative probability for `{k}`"
                )));
            }
            sum += v;
        }
        if sum <= 0.0 {
            return Err(BackendError::Protocol("all candidate scores are zero".into()));
        }
        let probs = scores.into_iter().map(|(k, v)| (k, v / sum)).collect();
        Ok(CandidateDistribution { probs })
    }

    pub fn get(&self, candidate: &str) -> f64 {
        self.probs.get(candidate).copied().unwrap_or(0.0)
    }

    /// Sum of all probabilities; 1 within 1e-9 for any valid distribution.
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// Generation controls. `max_length` is the backend's output budget in its
/// own generation units (tokens for the mock); must be positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateParams {
    pub max_length: usize,
    pub stop_sequences: Vec<String>,
}

impl GenerateParams {
    pub fn new(max_length: usize, stop_sequences: Vec<String>) -> Self {
        GenerateParams {
            max_length,
            stop_sequences,
        }
    }
}

/// Locator for a backend: an `http(s)://` endpoint or the literal mock
/// designator `mock` / `mock:SEED`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub endpoint: String,
    pub embedding_dims: usize,
    pub name: String,
}

impl BackendDescriptor {
    pub fn mock(seed: u64, dims: usize) -> Self {
        BackendDescriptor {
            endpoint: format!("mock:{seed}"),
            embedding_dims: dims,
            name: "mock".to_string(),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == "mock" || self.endpoint.starts_with("mock:")
    }

    /// Seed encoded in a mock designator (`mock:SEED`); 0 for plain `mock`.
    pub fn mock_seed(&self) -> Result<u64, BackendError> {
        match self.endpoint.strip_prefix("mock:") {
            Some(seed) => seed.parse().map_err(|_| {
                BackendError::InvalidRequest(format!("bad mock seed in `{}`", self.endpoint))
            }),
            None if self.endpoint == "mock" => Ok(0),
            None => Err(BackendError::InvalidRequest(format!(
                "`{}` is not a mock designator",
                self.endpoint
            ))),
        }
    }
}

/// The inference-backend contract.
///
/// `embed` returns one mean-pooled sentence vector per text (pooling over
/// the model's last hidden states happens server-side; this contract fixes
/// the semantics) and is a pure function of (backend session, text):
/// repeated identical text yields identical vectors within a session.
/// `probe` distributions sum to 1 over exactly the probe's candidates.
/// `generate` honors stop sequences by truncating before the first match.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn embedding_dims(&self) -> usize;

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError>;

    fn probe_candidates(&self, probe: &CandidateProbe)
        -> Result<CandidateDistribution, BackendError>;

    fn generate(&self, prompt: &str, params: &GenerateParams) -> Result<String, BackendError>;
}

/// Shared precondition check for `embed`: runs before any network call.
pub fn validate_embed_request(texts: &[String]) -> Result<(), BackendError> {
    if texts.is_empty() {
        return Err(BackendError::InvalidRequest("no texts to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(BackendError::InvalidRequest(format!(
            "empty text at position {i}"
        )));
    }
    Ok(())
}

/// Shared precondition check for `generate`.
pub fn validate_generate_request(
    prompt: &str,
    params: &GenerateParams,
) -> Result<(), BackendError> {
    if prompt.is_empty() {
        return Err(BackendError::InvalidRequest("empty prompt".into()));
    }
    if params.max_length == 0 {
        return Err(BackendError::InvalidRequest("max_length must be positive".into()));
    }
    Ok(())
}

/// Fans a large `embed` request out over up to `max_in_flight` concurrent
/// batch requests against the inner backend. Batches are contiguous and
/// results are stitched in input order, so outputs do not depend on thread
/// scheduling. Probing and generation are single requests and pass through.
pub struct ConcurrentBackend {
    inner: std::sync::Arc<dyn Backend>,
    max_in_flight: usize,
    batch_size: usize,
}

impl ConcurrentBackend {
    pub const DEFAULT_BATCH: usize = 64;

    pub fn new(inner: std::sync::Arc<dyn Backend>, max_in_flight: usize) -> Self {
        ConcurrentBackend {
            inner,
            max_in_flight: max_in_flight.max(1),
            batch_size: Self::DEFAULT_BATCH,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }
}

impl Backend for ConcurrentBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn embedding_dims(&self) -> usize {
        self.inner.embedding_dims()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        validate_embed_request(texts)?;
        if texts.len() <= self.batch_size || self.max_in_flight == 1 {
            return self.inner.embed(texts);
        }
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let results = crate::parallel::par_map(&batches, self.max_in_flight, |batch| {
            self.inner.embed(batch)
        });
        let mut out = Vec::with_capacity(texts.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }

    fn probe_candidates(&self, probe: &CandidateProbe)
        -> Result<CandidateDistribution, BackendError> {
        self.inner.probe_candidates(probe)
    }

    fn generate(&self, prompt: &str, params: &GenerateParams) -> Result<String, BackendError> {
        self.inner.generate(prompt, params)
    }
}

/// Truncate `text` before the first occurrence of any stop sequence.
/// Returns the (possibly shortened) prefix and whether a stop matched.
pub fn apply_stop_sequences<'a>(text: &'a str, stops: &[String]) -> (&'a str, bool) {
    let mut cut: Option<usize> = None;
    for stop in stops {
        if stop.is_empty() {
            continue;
        }
        if let Some(pos) = text.find(stop.as_str()) {
            cut = Some(cut.map_or(pos, |c| c.min(pos)));
        }
    }
    match cut {
        Some(pos) => (&text[..pos], true),
        None => (text, false),
    }
}
