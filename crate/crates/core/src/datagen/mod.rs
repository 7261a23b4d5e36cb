//! Synthetic training data: templated scenes filtered by the compiler and
//! validator, corpus views of them, and preference pairs built by
//! corrupting valid programs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

mod corpus;
mod error_chain;
mod sampler;
mod template;
mod text;

pub use corpus::{
    extract_pretrain_corpus, read_jsonl, sft_pairs, to_jsonl, write_jsonl, CorpusField, PretrainRecord, Record, SftPair,
};
pub use error_chain::{
    error_chain, failure_class, generate_dpo_pairs, generate_dpo_pairs_n, inject_error, ChainContext, ChainOutcome,
    DpoBatch, DpoPair, ErrorType, FailureClass, InjectedError, CHAIN_ATTEMPTS, CHAIN_SUBSETS,
};
pub use sampler::{generate_sft_dataset, passes_filter, sample_scene, Execution, SftSample, OVERSAMPLE};
pub use template::{PoolEntry, RelationRule, SceneTemplate, TopSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("template `{template}` exhausted: {reason}")]
    TemplateExhausted { template: String, reason: String },
    #[error("cannot inject {kind} error: {reason}")]
    InjectionFailed { kind: ErrorType, reason: String },
    #[error("error chain not verified after {attempts} attempts")]
    ChainFailed { attempts: usize },
    #[error("{0}")]
    Io(String),
    #[error("JSON: {0}")]
    Json(String),
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub(crate) fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
