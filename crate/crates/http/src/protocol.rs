//! Request/response bodies for the backend wire protocol.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use slavkit_core::backend::BackendError;

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbeRequest {
    pub prompt: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbeResponse {
    pub probs: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_length: usize,
    #[serde(default)]
    pub stop: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

/// Wire name for each error kind.
pub fn error_kind(err: &BackendError) -> &'static str {
    match err {
        BackendError::Transport(_) => "transport",
        BackendError::Capability(_) => "capability",
        BackendError::Protocol(_) => "protocol",
        BackendError::InvalidRequest(_) => "invalid",
    }
}

/// Reconstruct an error from its wire kind.
pub fn error_from_kind(kind: &str, message: String) -> BackendError {
    match kind {
        "transport" => BackendError::Transport(message),
        "capability" => BackendError::Capability(message),
        "invalid" => BackendError::InvalidRequest(message),
        _ => BackendError::Protocol(message),
    }
}
