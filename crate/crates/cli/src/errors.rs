//! CLI error type with the process exit-code mapping: 1 usage, 2 data
//! validation, 3 backend failure, 4 internal.

use slavkit_core::assembly::AssemblyError;
use slavkit_core::backend::BackendError;
use slavkit_core::corpus::CorpusError;
use slavkit_core::fewshot::FewshotError;
use slavkit_core::mcq::McqError;
use slavkit_core::metrics::MetricsError;
use slavkit_core::rag::RagError;
use slavkit_core::retrieval::RetrievalError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Backend(m) => write!(f, "backend error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::InvalidRequest(m) => CliError::Data(m),
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Backend(b) => b.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<McqError> for CliError {
    fn from(e: McqError) -> Self {
        match e {
            McqError::Backend(b) => b.into(),
            McqError::OrderFailed { .. } => CliError::Backend(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<RagError> for CliError {
    fn from(e: RagError) -> Self {
        match e {
            RagError::Backend(b) => b.into(),
            RagError::Retrieval(r) => r.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FewshotError> for CliError {
    fn from(e: FewshotError) -> Self {
        match e {
            FewshotError::Backend(b) => b.into(),
            FewshotError::Retrieval(r) => r.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
