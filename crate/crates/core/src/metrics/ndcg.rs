use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::types::Qrels;
use crate::{Error, Result};

/// Discounted cumulative gain with exponential gain `2^g - 1` and `log2(i + 1)` discount.
pub fn dcg(grades: &[u32], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| (libm::exp2(f64::from(g)) - 1.0) / libm::log2(i as f64 + 2.0))
        .sum()
}

/// NDCG@k of `ranking` against the judgments for `query_id`.
///
/// Unjudged documents have grade 0. The ideal ordering uses every judged grade
/// for the query, so documents missing from the ranking still count against it.
/// Returns 0 when the query has no positive judgment.
pub fn ndcg_at_k<S: AsRef<str>>(
    ranking: &[S],
    qrels: &Qrels,
    query_id: &str,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut seen = BTreeSet::new();
    for d in ranking {
        if !seen.insert(d.as_ref()) {
            return Err(Error::DuplicateInRanking(d.as_ref().into()));
        }
    }
    let mut ideal: Vec<u32> = qrels
        .judged(query_id)
        .map(|m| m.values().copied().filter(|&g| g > 0).collect())
        .unwrap_or_default();
    if ideal.is_empty() {
        return Ok(0.0);
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let gains: Vec<u32> = ranking
        .iter()
        .take(k)
        .map(|d| qrels.grade(query_id, d.as_ref()))
        .collect();
    Ok(dcg(&gains, k) / dcg(&ideal, k))
}
