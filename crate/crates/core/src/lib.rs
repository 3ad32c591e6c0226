//! Enterprise semantic-search toolkit.
//!
//! The crate covers the whole pipeline from raw documents to evaluated
//! retrieval runs:
//!
//! - [`corpus`]: extraction, cleaning, PII masking, tokenization and chunking
//! - [`annotate`]: dictionary pre-annotation, annotator batches, unanimous merge
//! - [`qagen`]: prompt rendering, question generation and curation, dataset splits
//! - [`embed`]: embedder and scorer contracts with stub, oracle, file and HTTP providers
//! - [`retrieval`]: exact dense and late-interaction search, reranking, pipelines,
//!   hard-negative mining and training manifests
//! - [`evalkit`]: NDCG/MAP/precision/recall and the experiment matrix runner
//! - [`cli`]: the `emkit` command-line front end

pub mod annotate;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod evalkit;
pub mod http;
pub mod jsonl;
pub mod qagen;
pub mod retrieval;
pub mod seed;
