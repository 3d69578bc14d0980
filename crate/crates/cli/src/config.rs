//! Plain-file configuration: a single JSON config plus flag overrides, flags
//! winning. All randomness flows from explicit seeds in config or flags — no
//! command reads entropy from the environment.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};

use slavkit_core::backend::{
    Backend, BackendDescriptor, BackendError, CandidateDistribution, CandidateProbe,
    EmbeddingVector, GenerateParams,
};
use slavkit_http::open_backend;

use crate::errors::CliError;

/// Default embedding width when nothing else specifies one.
pub const DEFAULT_DIMS: usize = 32;

/// Environment variable consulted as a backend endpoint default.
pub const BACKEND_URL_ENV: &str = "SLAVKIT_BACKEND_URL";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Shared backend for every role unless a role override is present.
    #[serde(default)]
    pub backend: Option<BackendDescriptor>,
    #[serde(default)]
    pub backends: RoleBackends,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    /// Worker threads for parallel sections; 0 or absent = all cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoleBackends {
    #[serde(default)]
    pub embedder: Option<BackendDescriptor>,
    #[serde(default)]
    pub scorer: Option<BackendDescriptor>,
    #[serde(default)]
    pub generator: Option<BackendDescriptor>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&raw).map_err(|e| {
                    CliError::Usage(format!("invalid config {}: {e}", p.display()))
                })
            }
        }
    }

    pub fn seed(&self, key: &str, flag: Option<u64>, default: u64) -> u64 {
        flag.or_else(|| self.seeds.get(key).copied()).unwrap_or(default)
    }

    pub fn param_usize(&self, key: &str, flag: Option<usize>, default: usize) -> usize {
        flag.or_else(|| self.params.get(key).and_then(|v| v.as_u64()).map(|v| v as usize))
            .unwrap_or(default)
    }

    /// Worker threads for parallel sections; defaults to the processor count.
    pub fn workers(&self) -> usize {
        match self.parallelism {
            Some(n) if n > 0 => n,
            _ => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

/// Backend selection flags, shared by every command that talks to one.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// Backend endpoint URL, or the literal `mock` / `mock:SEED`
    #[arg(long)]
    pub backend: Option<String>,
    /// Shortcut for `--backend mock:SEED`
    #[arg(long)]
    pub mock_seed: Option<u64>,
    /// Embedding dimensions the backend produces
    #[arg(long)]
    pub dims: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Embedder,
    Scorer,
    Generator,
}

impl Role {
    fn pick(self, roles: &RoleBackends) -> Option<&BackendDescriptor> {
        match self {
            Role::Embedder => roles.embedder.as_ref(),
            Role::Scorer => roles.scorer.as_ref(),
            Role::Generator => roles.generator.as_ref(),
        }
    }
}

/// Resolve a role's descriptor: flags beat config role overrides, which beat
/// the shared config backend, which beats the environment default.
pub fn resolve_descriptor(
    args: &BackendArgs,
    config: &PipelineConfig,
    role: Role,
) -> Result<BackendDescriptor, CliError> {
    let dims = args
        .dims
        .unwrap_or_else(|| config.param_usize("dims", None, DEFAULT_DIMS));
    if let Some(seed) = args.mock_seed {
        return Ok(BackendDescriptor::mock(seed, dims));
    }
    if let Some(endpoint) = &args.backend {
        return Ok(BackendDescriptor {
            endpoint: endpoint.clone(),
            embedding_dims: dims,
            name: if endpoint.starts_with("mock") { "mock".into() } else { "http".into() },
        });
    }
    if let Some(desc) = role.pick(&config.backends).or(config.backend.as_ref()) {
        let mut desc = desc.clone();
        if let Some(d) = args.dims {
            desc.embedding_dims = d;
        }
        return Ok(desc);
    }
    if let Ok(endpoint) = std::env::var(BACKEND_URL_ENV) {
        return Ok(BackendDescriptor {
            endpoint,
            embedding_dims: dims,
            name: "http".into(),
        });
    }
    Err(CliError::Usage(format!(
        "no backend specified: pass --backend/--mock-seed, set one in the config, or export {BACKEND_URL_ENV}"
    )))
}

/// Open a backend with embedding requests fanned out over the configured
/// worker count (the in-flight request cap).
pub fn open_concurrent(
    descriptor: &BackendDescriptor,
    config: &PipelineConfig,
) -> Result<Arc<dyn Backend>, CliError> {
    let inner = open_backend(descriptor)?;
    let workers = config.workers();
    if workers > 1 {
        Ok(Arc::new(slavkit_core::backend::ConcurrentBackend::new(inner, workers)))
    } else {
        Ok(inner)
    }
}

/// One backend per role behind a single [`Backend`] facade, so pipeline code
/// that embeds, probes and generates can mix roles transparently.
pub struct RoleComposite {
    pub embedder: Arc<dyn Backend>,
    pub scorer: Arc<dyn Backend>,
    pub generator: Arc<dyn Backend>,
    name: String,
}

impl RoleComposite {
    pub fn resolve(args: &BackendArgs, config: &PipelineConfig) -> Result<Self, CliError> {
        let e = resolve_descriptor(args, config, Role::Embedder)?;
        let s = resolve_descriptor(args, config, Role::Scorer)?;
        let g = resolve_descriptor(args, config, Role::Generator)?;
        let embedder = open_concurrent(&e, config)?;
        let scorer = if s == e { embedder.clone() } else { open_backend(&s)? };
        let generator = if g == e {
            embedder.clone()
        } else if g == s {
            scorer.clone()
        } else {
            open_backend(&g)?
        };
        let name = embedder.name().to_string();
        Ok(RoleComposite {
            embedder,
            scorer,
            generator,
            name,
        })
    }

    /// Descriptors actually in use, for run manifests.
    pub fn describe(&self) -> Vec<String> {
        let mut out = vec![format!(
            "embedder={} dims={}",
            self.embedder.name(),
            self.embedder.embedding_dims()
        )];
        out.push(format!("scorer={}", self.scorer.name()));
        out.push(format!("generator={}", self.generator.name()));
        out
    }
}

impl Backend for RoleComposite {
    fn name(&self) -> &str {
        &self.name
    }

    fn embedding_dims(&self) -> usize {
        self.embedder.embedding_dims()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        self.embedder.embed(texts)
    }

    fn probe_candidates(
        &self,
        probe: &CandidateProbe,
    ) -> Result<CandidateDistribution, BackendError> {
        self.scorer.probe_candidates(probe)
    }

    fn generate(&self, prompt: &str, params: &GenerateParams) -> Result<String, BackendError> {
        self.generator.generate(prompt, params)
    }
}
