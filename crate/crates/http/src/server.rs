//! Serve any [`Backend`] over the wire protocol on a dedicated thread with
//! its own runtime, so synchronous callers (tests, the CLI) can host a mock
//! endpoint without becoming async themselves.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};

use slavkit_core::backend::{Backend, BackendError, CandidateProbe, GenerateParams};

use crate::protocol::{
    error_kind, EmbedRequest, EmbedResponse, ErrorBody, ErrorResponse, GenerateRequest,
    GenerateResponse, ProbeRequest, ProbeResponse,
};

fn error_response(err: BackendError) -> Response {
    let status = match &err {
        BackendError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        BackendError::Capability(_) => StatusCode::NOT_IMPLEMENTED,
        BackendError::Protocol(_) => StatusCode::INTERNAL_SERVER_ERROR,
        BackendError::Transport(_) => StatusCode::SERVICE_UNAVAILABLE,
    };
    let body = ErrorResponse {
        error: ErrorBody {
            kind: error_kind(&err).to_string(),
            message: err.to_string(),
        },
    };
    (status, Json(body)).into_response()
}

type Shared = Arc<dyn Backend>;

async fn run_blocking<T, F>(backend: Shared, f: F) -> Result<T, BackendError>
where
    T: Send + 'static,
    F: FnOnce(&dyn Backend) -> Result<T, BackendError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(backend.as_ref()))
        .await
        .map_err(|e| BackendError::Transport(format!("worker panicked: {e}")))?
}

async fn embed(State(backend): State<Shared>, Json(req): Json<EmbedRequest>) -> Response {
    match run_blocking(backend, move |b| b.embed(&req.texts)).await {
        Ok(vectors) => Json(EmbedResponse {
            vectors: vectors.into_iter().map(|v| v.values).collect(),
        })
        .into_response(),
        Err(e) => error_response(e),
    }
}

async fn probe(State(backend): State<Shared>, Json(req): Json<ProbeRequest>) -> Response {
    let result = run_blocking(backend, move |b| {
        let probe = CandidateProbe {
            prompt: req.prompt,
            candidates: req.candidates,
        };
        probe.validate()?;
        b.probe_candidates(&probe)
    })
    .await;
    match result {
        Ok(dist) => Json(ProbeResponse { probs: dist.probs }).into_response(),
        Err(e) => error_response(e),
    }
}

async fn generate(State(backend): State<Shared>, Json(req): Json<GenerateRequest>) -> Response {
    let result = run_blocking(backend, move |b| {
        b.generate(&req.prompt, &GenerateParams::new(req.max_length, req.stop))
    })
    .await;
    match result {
        Ok(text) => Json(GenerateResponse { text }).into_response(),
        Err(e) => error_response(e),
    }
}

pub fn router(backend: Shared) -> Router {
    Router::new()
        .route("/v1/embed", post(embed))
        .route("/v1/probe", post(probe))
        .route("/v1/generate", post(generate))
        .with_state(backend)
}

/// A running server: its bound address plus a shutdown handle.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    /// Base URL of the running server.
    pub fn url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(handle) = self.thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Bind and serve a backend on `addr` (use port 0 for an ephemeral port).
/// The server runs on its own thread until the handle is shut down or
/// dropped.
pub fn serve(backend: Shared, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(backend);
    let thread = std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("runtime builds");
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(addr).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = addr_tx.send(Err(e));
                    return;
                }
            };
            let local = listener.local_addr().expect("bound address");
            let _ = addr_tx.send(Ok(local));
            let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            });
            if let Err(e) = serve.await {
                eprintln!("backend server error: {e}");
            }
        });
    });
    let addr = addr_rx
        .recv()
        .map_err(|_| std::io::Error::other("server thread died before binding"))??;
    Ok(ServerHandle {
        addr,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}
