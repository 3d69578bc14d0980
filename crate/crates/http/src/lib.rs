//! HTTP wire protocol for inference backends.
//!
//! Three endpoints, all JSON over UTF-8:
//!
//! - `POST /v1/embed` `{"texts":[...]}` → `{"vectors":[[...]]}`
//! - `POST /v1/probe` `{"prompt","candidates":[...]}` → `{"probs":{cand:p}}`
//! - `POST /v1/generate` `{"prompt","max_length","stop":[...]}` → `{"text"}`
//!
//! Errors come back as `{"error":{"kind","message"}}` with kind one of
//! `invalid`, `capability`, `protocol`, `transport`. The client maps network
//! failures and 5xx responses to retryable transport errors, missing
//! endpoints (404/405/501) to capability errors, and malformed replies to
//! protocol errors; only transport errors are retried.
//!
//! [`serve`] exposes any [`Backend`] — the in-process mock included — over
//! this surface, which is how the integration tests drive the protocol
//! end to end.

pub mod client;
pub mod protocol;
pub mod server;

pub use client::HttpBackend;
pub use server::{serve, ServerHandle};

use std::sync::Arc;

use slavkit_core::backend::{Backend, BackendDescriptor, BackendError, MockBackend};

/// Open a backend from a descriptor: the `mock`/`mock:SEED` designator gives
/// the in-process mock, anything else is treated as an HTTP endpoint and
/// probed for reachability.
pub fn open_backend(descriptor: &BackendDescriptor) -> Result<Arc<dyn Backend>, BackendError> {
    if descriptor.is_mock() {
        let seed = descriptor.mock_seed()?;
        Ok(Arc::new(MockBackend::new(seed, descriptor.embedding_dims)?))
    } else {
        Ok(Arc::new(HttpBackend::connect(descriptor)?))
    }
}
