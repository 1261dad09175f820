use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, TokenUsage};
use crate::error::GatewayError;

/// One stored exchange; the usage is what the provider billed the first time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedExchange {
    pub key: String,
    pub request: CompletionRequest,
    pub response: String,
    pub usage: TokenUsage,
}

/// `<root>/<first two hex chars>/<key>.json`.
#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            tmp_counter: AtomicU64::new(0),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let prefix = key.get(..2).unwrap_or("00");
        self.root.join(prefix).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CachedExchange>, GatewayError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
        };
        let ex: CachedExchange = serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        if ex.key != key {
            return Err(GatewayError::Cache(format!(
                "{} holds key {}",
                path.display(),
                ex.key
            )));
        }
        Ok(Some(ex))
    }

    pub fn put(&self, ex: &CachedExchange) -> Result<(), GatewayError> {
        let path = self.path_for(&ex.key);
        let err = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(err)?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{}.{}.{n}.tmp", ex.key, std::process::id()));
        let mut body = serde_json::to_vec_pretty(ex).expect("exchange serializes");
        body.push(b'\n');
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(&body).map_err(err)?;
        drop(f);
        fs::rename(&tmp, &path).map_err(err)
    }
}
