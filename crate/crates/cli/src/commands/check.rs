//! `slavkit backend-check` — exercise all three backend facilities and
//! report per-operation status.

use clap::Args;

use slavkit_core::backend::{CandidateProbe, GenerateParams};
use slavkit_http::open_backend;

use crate::config::{resolve_descriptor, BackendArgs, PipelineConfig, Role};
use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
}

pub fn run(args: &CheckArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let descriptor = resolve_descriptor(&args.backend, config, Role::Embedder)?;
    println!(
        "backend: {} at {} (dims={})",
        descriptor.name, descriptor.endpoint, descriptor.embedding_dims
    );
    let backend = open_backend(&descriptor)?;
    let mut failed = false;

    match backend.embed(&["ping".to_string(), "pong".to_string()]) {
        Ok(vectors) => println!(
            "embed: ok ({} vectors, dims={}, norm[0]={:.6})",
            vectors.len(),
            vectors[0].dims(),
            vectors[0].norm()
        ),
        Err(e) => {
            println!("embed: FAILED ({e})");
            failed = true;
        }
    }

    let probe = CandidateProbe::new("Answer:", vec![" A".into(), " B".into()])
        .expect("static probe is valid");
    match backend.probe_candidates(&probe) {
        Ok(dist) => println!(
            "probe: ok ({} candidates, sum={:.9})",
            dist.probs.len(),
            dist.total()
        ),
        Err(e) => {
            println!("probe: FAILED ({e})");
            failed = true;
        }
    }

    match backend.generate("Hello", &GenerateParams::new(4, vec![])) {
        Ok(text) => println!("generate: ok ({} chars)", text.len()),
        Err(e) => {
            println!("generate: FAILED ({e})");
            failed = true;
        }
    }

    if failed {
        Err(CliError::Backend("one or more backend checks failed".into()))
    } else {
        Ok(())
    }
}
