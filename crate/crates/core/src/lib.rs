//! Core pipeline library for building limited-resource Slavic MT + QA systems
//! against any inference backend that exposes embeddings, candidate-token
//! probabilities and generation.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`corpus`]: canonical data model (parallel pairs, MCQ items, documents)
//!   with tolerant loaders and deduplication
//! - [`backend`]: the inference-backend contract plus a deterministic,
//!   fully in-process mock backend
//! - [`metrics`]: native ChrF++, BLEU and accuracy with checkpoint selection
//! - [`retrieval`]: exact cosine top-k search, similarity-based training-data
//!   selection, index/embedding persistence
//! - [`mcq`]: multiple-choice scoring with answer-order permutation averaging
//! - [`rag`]: character chunking, subject-routed indexes, context retrieval
//! - [`fewshot`]: similarity few-shot MT prompting and output parsing
//! - [`assembly`]: finetuning mixtures, learning-rate-search and
//!   back-translation job planning
//!
//! Everything is deterministic given explicit seeds; no operation reads
//! entropy from the environment.

pub mod assembly;
pub mod backend;
pub mod corpus;
pub mod fewshot;
pub mod mcq;
pub mod metrics;
mod parallel;
pub mod rag;
pub mod retrieval;
