//! Deterministic in-process backend for offline testing.
//!
//! All three operations are pure functions of (seed, inputs), so two
//! processes with the same seed produce bit-identical outputs. The hash
//! construction is part of the contract and is documented field by field so
//! tests can recompute expected values independently:
//!
//! For a seed `s` and byte parts `p1..pn`, the keyed hash is
//!
//! ```text
//! H(s, p1..pn) = first 8 bytes (little-endian u64) of
//!     SHA-256( "slavkit-mock-v1" || le64(s) || le64(|p1|) || p1 || ... )
//! ```
//!
//! - `embed(t)[i]` before normalization is `unit(H(s, "embed", t, le64(i)))`
//!   mapped to `[-1, 1)` via `h / 2^63 - 1`; the vector is then L2-normalized.
//! - `probe` scores each candidate as `H(s, "probe", prompt, candidate) / 2^64`
//!   in `[0, 1)` and applies a softmax over the candidate set.
//! - `generate` emits up to `max_length` tokens, token `t` being
//!   `MOCK_VOCABULARY[H(s, "generate", prompt, le64(t)) mod 16]`, joined by
//!   single spaces, truncating before the first stop-sequence match.

use sha2::{Digest, Sha256};

use super::{
    apply_stop_sequences, validate_embed_request, validate_generate_request, Backend,
    BackendError, CandidateDistribution, CandidateProbe, EmbeddingVector, GenerateParams,
};

/// Fixed 16-token vocabulary for pseudo-generation.
pub const MOCK_VOCABULARY: [&str; 16] = [
    "ala", "bor", "cek", "dol", "ena", "fir", "gon", "hyl", "iwo", "jas", "kol", "lum", "mir",
    "nor", "osa", "pyr",
];

/// Deterministic mock backend; stateless beyond (seed, dims), safe for
/// unlimited concurrent use.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    dims: usize,
    name: String,
}

impl MockBackend {
    /// `dims` must be at least 2.
    pub fn new(seed: u64, dims: usize) -> Result<Self, BackendError> {
        if dims < 2 {
            return Err(BackendError::InvalidRequest(format!(
                "mock dims must be >= 2, got {dims}"
            )));
        }
        Ok(MockBackend {
            seed,
            dims,
            name: "mock".to_string(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn keyed_hash(&self, parts: &[&[u8]]) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(b"slavkit-mock-v1");
        hasher.update(self.seed.to_le_bytes());
        for part in parts {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part);
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut raw = Vec::with_capacity(self.dims);
        for i in 0..self.dims {
            let h = self.keyed_hash(&[b"embed", text.as_bytes(), &(i as u64).to_le_bytes()]);
            // map u64 to [-1, 1)
            raw.push(h as f64 / (1u64 << 63) as f64 - 1.0);
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            raw[0] = 1.0;
            return EmbeddingVector::new(raw.iter().map(|&v| v as f32).collect());
        }
        EmbeddingVector::new(raw.iter().map(|&v| (v / norm) as f32).collect())
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn embedding_dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        validate_embed_request(texts)?;
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn probe_candidates(
        &self,
        probe: &CandidateProbe,
    ) -> Result<CandidateDistribution, BackendError> {
        probe.validate()?;
        let scores: Vec<f64> = probe
            .candidates
            .iter()
            .map(|c| {
                let h = self.keyed_hash(&[b"probe", probe.prompt.as_bytes(), c.as_bytes()]);
                h as f64 / (u64::MAX as f64 + 1.0)
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let map = probe
            .candidates
            .iter()
            .cloned()
            .zip(exps)
            .collect::<std::collections::BTreeMap<_, _>>();
        CandidateDistribution::from_scores(&probe.candidates, map)
    }

    fn generate(&self, prompt: &str, params: &GenerateParams) -> Result<String, BackendError> {
        validate_generate_request(prompt, params)?;
        let mut out = String::new();
        for t in 0..params.max_length {
            if t > 0 {
                out.push(' ');
            }
            let h = self.keyed_hash(&[b"generate", prompt.as_bytes(), &(t as u64).to_le_bytes()]);
            out.push_str(MOCK_VOCABULARY[(h % 16) as usize]);
            let (truncated, hit) = apply_stop_sequences(&out, &params.stop_sequences);
            if hit {
                return Ok(truncated.to_string());
            }
        }
        Ok(out)
    }
}
