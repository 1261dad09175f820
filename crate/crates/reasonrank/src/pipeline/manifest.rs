use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use reasonrank_core::usage::UsageRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Settings the stage depends on.
    pub settings: BTreeMap<String, String>,
    /// Input name -> content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the run directory -> content hash.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainInfo {
    pub source: String,
    pub pool_size: usize,
    pub train_size: usize,
    pub mix_weights: [f64; 3],
    /// Synthetic source only: mean NDCG@5 against teacher order on pool
    /// queries left out of the sample.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub heldout_ndcg_at_5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub name: String,
    pub config: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
    /// Teacher usage per prompt mode, as originally billed.
    pub usage: BTreeMap<String, UsageRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train: Option<TrainInfo>,
}

impl Manifest {
    pub fn new(name: &str) -> Self {
        Self {
            version: MANIFEST_VERSION,
            name: name.into(),
            config: BTreeMap::new(),
            stages: BTreeMap::new(),
            usage: BTreeMap::new(),
            train: None,
        }
    }

    pub fn load_or_new(path: &Path, name: &str) -> Result<Self> {
        match fs::read(path) {
            Ok(bytes) => {
                let m: Manifest = serde_json::from_slice(&bytes)
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                if m.version != MANIFEST_VERSION {
                    return Err(Error::Format(format!(
                        "{}: manifest version {} is not supported",
                        path.display(),
                        m.version
                    )));
                }
                Ok(m)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new(name)),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(self).expect("manifest serializes");
        body.push(b'\n');
        crate::corpus_io::write_file(path, &body)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a file, or of a directory tree (relative names and file
/// hashes, in sorted order). `None` if the path does not exist.
pub fn hash_path(path: &Path) -> Result<Option<String>> {
    if path.is_file() {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        return Ok(Some(sha256_hex(&bytes)));
    }
    if !path.is_dir() {
        return Ok(None);
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        let bytes = fs::read(path.join(&rel)).map_err(|e| Error::io(path.join(&rel), e))?;
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(Sha256::digest(&bytes));
    }
    Ok(Some(hex::encode(h.finalize())))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("child of root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
