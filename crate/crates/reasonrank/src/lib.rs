//! Files, teacher gateway and pipeline commands around `reasonrank-core`.

pub mod config;
pub mod corpus_io;
pub mod error;
pub mod gateway;
pub mod index_file;
pub mod kv;
pub mod pipeline;

pub use error::{Error, GatewayError, Result};
