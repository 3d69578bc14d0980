//! Blocking HTTP client implementing the [`Backend`] contract against a
//! remote endpoint.
//!
//! Preconditions are checked before anything leaves the process. Transport
//! failures are retried up to [`HttpBackend::DEFAULT_RETRIES`] times with
//! exponential backoff; capability and protocol errors are never retried.

use std::collections::BTreeMap;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use slavkit_core::backend::{
    validate_embed_request, validate_generate_request, Backend, BackendDescriptor, BackendError,
    CandidateDistribution, CandidateProbe, EmbeddingVector, GenerateParams,
};

use crate::protocol::{
    error_from_kind, EmbedRequest, EmbedResponse, ErrorResponse, GenerateRequest,
    GenerateResponse, ProbeRequest, ProbeResponse,
};

#[derive(Debug)]
pub struct HttpBackend {
    base: reqwest::Url,
    name: String,
    dims: usize,
    agent: reqwest::blocking::Client,
    max_retries: u32,
    backoff_base: Duration,
}

impl HttpBackend {
    pub const DEFAULT_RETRIES: u32 = 3;
    const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);
    const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

    /// Open a session against the descriptor's endpoint. Reachability is
    /// verified with a TCP connect at open; protocol traffic stays lazy.
    pub fn connect(descriptor: &BackendDescriptor) -> Result<Self, BackendError> {
        let base = reqwest::Url::parse(&descriptor.endpoint).map_err(|e| {
            BackendError::InvalidRequest(format!("bad endpoint `{}`: {e}", descriptor.endpoint))
        })?;
        let host = base
            .host_str()
            .ok_or_else(|| {
                BackendError::InvalidRequest(format!("endpoint `{base}` has no host"))
            })?
            .to_string();
        let port = base.port_or_known_default().unwrap_or(80);
        let addr = (host.as_str(), port)
            .to_socket_addrs()
            .map_err(|e| BackendError::Transport(format!("cannot resolve {host}:{port}: {e}")))?
            .next()
            .ok_or_else(|| BackendError::Transport(format!("no address for {host}:{port}")))?;
        TcpStream::connect_timeout(&addr, Self::CONNECT_TIMEOUT)
            .map_err(|e| BackendError::Transport(format!("{addr} unreachable: {e}")))?;

        let agent = reqwest::blocking::Client::builder()
            .timeout(Self::REQUEST_TIMEOUT)
            .connect_timeout(Self::CONNECT_TIMEOUT)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            base,
            name: descriptor.name.clone(),
            dims: descriptor.embedding_dims,
            agent,
            max_retries: Self::DEFAULT_RETRIES,
            backoff_base: Duration::from_millis(100),
        })
    }

    /// Override the retry count and backoff base (tests use short backoffs).
    pub fn with_retry(mut self, max_retries: u32, backoff_base: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff_base = backoff_base;
        self
    }

    fn endpoint(&self, path: &str) -> Result<reqwest::Url, BackendError> {
        self.base
            .join(path)
            .map_err(|e| BackendError::InvalidRequest(format!("bad path {path}: {e}")))
    }

    fn post_once<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        url: &reqwest::Url,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let response = self
            .agent
            .post(url.clone())
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_success() {
            return response
                .json::<Resp>()
                .map_err(|e| BackendError::Protocol(format!("malformed response: {e}")));
        }
        let text = response.text().unwrap_or_default();
        if let Ok(err) = serde_json::from_str::<ErrorResponse>(&text) {
            return Err(error_from_kind(&err.error.kind, err.error.message));
        }
        // no structured body: classify by status
        match status.as_u16() {
            404 | 405 | 501 => Err(BackendError::Capability(format!(
                "endpoint {url} not supported ({status})"
            ))),
            code if code >= 500 => Err(BackendError::Transport(format!("{status}: {text}"))),
            _ => Err(BackendError::Protocol(format!("{status}: {text}"))),
        }
    }

    /// Retry transport errors with exponential backoff; anything else
    /// propagates immediately.
    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = self.endpoint(path)?;
        let mut attempt = 0u32;
        loop {
            match self.post_once(&url, body) {
                Ok(resp) => return Ok(resp),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    std::thread::sleep(self.backoff_base * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn embedding_dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        validate_embed_request(texts)?;
        let resp: EmbedResponse = self.post(
            "v1/embed",
            &EmbedRequest {
                texts: texts.to_vec(),
            },
        )?;
        if resp.vectors.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        let vectors: Vec<EmbeddingVector> = resp
            .vectors
            .into_iter()
            .map(EmbeddingVector::new)
            .collect();
        for v in &vectors {
            if v.dims() != self.dims {
                return Err(BackendError::Protocol(format!(
                    "backend returned {}-dim vectors, descriptor says {}",
                    v.dims(),
                    self.dims
                )));
            }
            if !v.is_finite() {
                return Err(BackendError::Protocol("non-finite embedding values".into()));
            }
        }
        Ok(vectors)
    }

    fn probe_candidates(
        &self,
        probe: &CandidateProbe,
    ) -> Result<CandidateDistribution, BackendError> {
        probe.validate()?;
        let resp: ProbeResponse = self.post(
            "v1/probe",
            &ProbeRequest {
                prompt: probe.prompt.clone(),
                candidates: probe.candidates.clone(),
            },
        )?;
        let scores: BTreeMap<String, f64> = resp.probs.into_iter().collect();
        CandidateDistribution::from_scores(&probe.candidates, scores)
    }

    fn generate(&self, prompt: &str, params: &GenerateParams) -> Result<String, BackendError> {
        validate_generate_request(prompt, params)?;
        let resp: GenerateResponse = self.post(
            "v1/generate",
            &GenerateRequest {
                prompt: prompt.to_string(),
                max_length: params.max_length,
                stop: params.stop_sequences.clone(),
            },
        )?;
        Ok(resp.text)
    }
}
