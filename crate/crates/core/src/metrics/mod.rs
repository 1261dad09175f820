//! Ranking, text-quality and significance metrics.

mod ndcg;
mod stats;
mod text_quality;

pub use ndcg::{dcg, ndcg_at_k};
pub use stats::{paired_t_test, regularized_incomplete_beta, student_t_two_tailed_p, TTestResult};
pub use text_quality::{bleu, rouge_l};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Per-query values of one metric and their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub k: Option<usize>,
    pub per_query: Vec<(String, f64)>,
    pub mean: f64,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, k: Option<usize>, per_query: Vec<(String, f64)>) -> Self {
        let mean = if per_query.is_empty() {
            0.0
        } else {
            per_query.iter().map(|(_, v)| v).sum::<f64>() / per_query.len() as f64
        };
        Self {
            metric: metric.into(),
            k,
            per_query,
            mean,
        }
    }

    /// Mean as a percentage with two decimals, the way result tables print it.
    pub fn mean_percent(&self) -> String {
        alloc::format!("{:.2}", 100.0 * self.mean)
    }

    pub fn values(&self) -> Vec<f64> {
        self.per_query.iter().map(|(_, v)| *v).collect()
    }

    /// Values aligned to `query_ids`; queries missing from the report count as 0.
    pub fn aligned(&self, query_ids: &[String]) -> Vec<f64> {
        query_ids
            .iter()
            .map(|q| {
                self.per_query
                    .iter()
                    .find(|(id, _)| id == q)
                    .map(|(_, v)| *v)
                    .unwrap_or(0.0)
            })
            .collect()
    }
}
