use alloc::vec;
use alloc::vec::Vec;

use crate::text::fnv1a;

/// Names of the dense features preceding the hashed projection.
pub const BASE_FEATURES: [&str; 4] = ["bm25_norm", "term_overlap", "first_stage_rank", "length_ratio"];

/// Raw per-(query, document) statistics the extractor turns into features.
#[derive(Debug, Clone, Copy)]
pub struct FeatureInput<'a> {
    pub query_tokens: &'a [alloc::string::String],
    pub doc_tokens: &'a [alloc::string::String],
    pub bm25: f64,
    /// Largest BM25 score among this query's candidates.
    pub max_bm25: f64,
    /// 0-based position in the first-stage list.
    pub first_stage_rank: usize,
    pub candidate_count: usize,
    pub avgdl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureExtractor {
    pub hash_dim: usize,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self { hash_dim: 64 }
    }
}

impl FeatureExtractor {
    pub fn new(hash_dim: usize) -> Self {
        Self { hash_dim }
    }

    pub fn dim(&self) -> usize {
        BASE_FEATURES.len() + self.hash_dim
    }

    /// Fingerprint of the feature layout, stored next to trained weights.
    pub fn schema_hash(&self) -> u64 {
        let mut desc = alloc::string::String::new();
        for name in BASE_FEATURES {
            desc.push_str(name);
            desc.push(';');
        }
        desc.push_str(&alloc::format!("hashed_shared_terms:{}", self.hash_dim));
        fnv1a(desc.as_bytes())
    }

    /// BM25 normalised by the query's best score, distinct query-term coverage,
    /// `(n - rank) / n`, document length over average, then an L2-normalised
    /// hashed bag of the document tokens that also occur in the query.
    pub fn features(&self, input: &FeatureInput<'_>) -> Vec<f64> {
        let mut q: Vec<&str> = input.query_tokens.iter().map(|s| s.as_str()).collect();
        q.sort_unstable();
        q.dedup();
        let covered = q
            .iter()
            .filter(|t| input.doc_tokens.iter().any(|d| d == *t))
            .count();
        let n = input.candidate_count.max(1) as f64;
        let mut f = Vec::with_capacity(self.dim());
        f.push(if input.max_bm25 > 0.0 {
            input.bm25 / input.max_bm25
        } else {
            0.0
        });
        f.push(if q.is_empty() {
            0.0
        } else {
            covered as f64 / q.len() as f64
        });
        f.push((n - input.first_stage_rank as f64) / n);
        f.push(if input.avgdl > 0.0 {
            input.doc_tokens.len() as f64 / input.avgdl
        } else {
            0.0
        });
        let shared = input
            .doc_tokens
            .iter()
            .filter(|t| q.binary_search(&t.as_str()).is_ok());
        f.extend(self.hashed_bag(shared.map(|s| s.as_str())));
        f
    }

    /// L2-normalised hashed bag of the query tokens.
    pub fn query_context(&self, query_tokens: &[alloc::string::String]) -> Vec<f64> {
        self.hashed_bag(query_tokens.iter().map(|s| s.as_str()))
    }

    fn hashed_bag<'t>(&self, tokens: impl Iterator<Item = &'t str>) -> Vec<f64> {
        let mut bag = vec![0.0; self.hash_dim];
        if self.hash_dim == 0 {
            return bag;
        }
        for t in tokens {
            bag[(fnv1a(t.as_bytes()) % self.hash_dim as u64) as usize] += 1.0;
        }
        let norm = libm::sqrt(bag.iter().map(|v| v * v).sum::<f64>());
        if norm > 0.0 {
            bag.iter_mut().for_each(|v| *v /= norm);
        }
        bag
    }
}

/// Generation-head input: query context, document features, and a bias slot.
pub fn generation_context(query_context: &[f64], doc_features: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(query_context.len() + doc_features.len() + 1);
    c.extend_from_slice(query_context);
    c.extend_from_slice(doc_features);
    c.push(1.0);
    c
}
