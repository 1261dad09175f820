//! Core kernels for reasoning-augmented passage reranking.
//!
//! Everything in this crate is pure computation over in-memory values and
//! only needs an allocator: lexical retrieval, ranking and text-quality
//! metrics, teacher prompt construction, teacher response parsing, and the
//! distilled student reranker with its analytic gradients. File formats,
//! the LLM gateway and the command line live in the `reasonrank` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bm25;
pub mod error;
pub mod metrics;
pub mod prompt;
pub mod response;
pub mod sample;
pub mod student;
pub mod text;
pub mod types;
pub mod usage;

pub use error::{Error, Result};
pub use types::{Document, Qrels, Query, RankedList};
