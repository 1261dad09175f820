use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ResponseDefects;
use crate::{Error, Result};

/// Defects accumulated over every window of one query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDefects {
    pub query_id: String,
    pub duplicate_occurrences: usize,
    pub missing_documents: usize,
    pub out_of_range: usize,
}

impl QueryDefects {
    pub fn new(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            ..Default::default()
        }
    }

    pub fn absorb(&mut self, defects: &ResponseDefects) {
        self.duplicate_occurrences += defects.duplicates.len();
        self.missing_documents += defects.missing.len();
        self.out_of_range += defects.out_of_range.len();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    Duplicate,
    Missing,
    OutOfRange,
    NoJson,
}

/// One line of the defect log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub query_id: String,
    pub kind: DefectKind,
    pub detail: String,
}

impl DefectRecord {
    pub fn from_defects(query_id: &str, window_start: usize, d: &ResponseDefects) -> Vec<Self> {
        let mk = |kind, detail: String| DefectRecord {
            query_id: query_id.into(),
            kind,
            detail,
        };
        let mut out = Vec::new();
        for id in &d.duplicates {
            out.push(mk(DefectKind::Duplicate, alloc::format!("window {window_start}: [{id}]")));
        }
        for id in &d.missing {
            out.push(mk(DefectKind::Missing, alloc::format!("window {window_start}: [{id}]")));
        }
        for raw in &d.out_of_range {
            out.push(mk(DefectKind::OutOfRange, alloc::format!("window {window_start}: {raw}")));
        }
        out
    }
}

/// Batch-level teacher misbehaviour.
///
/// Duplicate rate is per occurrence (`100 * occurrences / queries`); missing
/// rate is per affected query. `*_reported` values are rounded to `precision`
/// decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorStats {
    pub query_count: usize,
    pub duplicate_occurrences: usize,
    pub queries_with_duplicates: usize,
    pub missing_documents: usize,
    pub queries_with_missing: usize,
    pub duplicate_rate: f64,
    pub missing_rate: f64,
    pub duplicate_rate_reported: f64,
    pub missing_rate_reported: f64,
    pub precision: u32,
}

impl BehaviorStats {
    pub fn duplicate_label(&self) -> String {
        percent_label(self.duplicate_rate_reported, self.precision)
    }

    pub fn missing_label(&self) -> String {
        percent_label(self.missing_rate_reported, self.precision)
    }
}

fn percent_label(v: f64, precision: u32) -> String {
    alloc::format!("{:.*}%", precision as usize, v)
}

/// Rounds half away from zero to `precision` decimals.
pub fn round_to(v: f64, precision: u32) -> f64 {
    let scale = libm::pow(10.0, f64::from(precision));
    libm::round(v * scale) / scale
}

pub fn analyze_behavior(batch: &[QueryDefects], precision: u32) -> Result<BehaviorStats> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len();
    let duplicate_occurrences = batch.iter().map(|q| q.duplicate_occurrences).sum();
    let missing_documents = batch.iter().map(|q| q.missing_documents).sum();
    let queries_with_duplicates = batch.iter().filter(|q| q.duplicate_occurrences > 0).count();
    let queries_with_missing = batch.iter().filter(|q| q.missing_documents > 0).count();
    let duplicate_rate = 100.0 * duplicate_occurrences as f64 / n as f64;
    let missing_rate = 100.0 * queries_with_missing as f64 / n as f64;
    Ok(BehaviorStats {
        query_count: n,
        duplicate_occurrences,
        queries_with_duplicates,
        missing_documents,
        queries_with_missing,
        duplicate_rate,
        missing_rate,
        duplicate_rate_reported: round_to(duplicate_rate, precision),
        missing_rate_reported: round_to(missing_rate, precision),
        precision,
    })
}
