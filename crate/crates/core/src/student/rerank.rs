use alloc::string::String;
use alloc::vec::Vec;

use super::model::StudentParams;
use super::vocab::{GenerationVocab, EOS, UNK};
use crate::types::RankedList;
use crate::{Error, Result};

/// Longest decoded reason, in tokens.
pub const MAX_REASON_TOKENS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct StudentRanking {
    pub ranking: RankedList,
    /// Generated reason per document, in ranked order.
    pub reasons: Vec<(String, String)>,
}

/// Greedy decoding from a position-independent distribution.
///
/// Each step emits the most likely token not yet emitted (UNK is never
/// emitted); decoding stops at EOS or after `max_tokens`.
pub fn decode_reason(logits: &[f64], max_tokens: usize) -> Vec<u32> {
    let mut used = alloc::vec![false; logits.len()];
    if let Some(u) = used.get_mut(UNK as usize) {
        *u = true;
    }
    let mut out = Vec::new();
    while out.len() < max_tokens {
        let best = logits
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .fold(None::<(usize, f64)>, |acc, (i, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            });
        match best {
            Some((i, _)) if i as u32 != EOS => {
                used[i] = true;
                out.push(i as u32);
            }
            _ => break,
        }
    }
    out
}

/// Sorts candidates by student score (ties keep input order) and decodes a reason for each.
pub fn rerank_student(
    params: &StudentParams,
    vocab: &GenerationVocab,
    query_id: &str,
    doc_ids: &[String],
    features: &[Vec<f64>],
    contexts: &[Vec<f64>],
) -> Result<StudentRanking> {
    if features.len() != doc_ids.len() || contexts.len() != doc_ids.len() {
        return Err(Error::DimensionMismatch {
            expected: doc_ids.len(),
            actual: features.len().min(contexts.len()),
        });
    }
    let scores = features
        .iter()
        .map(|f| params.score(f))
        .collect::<Result<Vec<f64>>>()?;
    let mut idx: Vec<usize> = (0..doc_ids.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut reasons = Vec::with_capacity(idx.len());
    for &i in &idx {
        let logits = params.generator.logits(&contexts[i])?;
        let ids = decode_reason(&logits, MAX_REASON_TOKENS);
        reasons.push((doc_ids[i].clone(), vocab.decode(&ids)));
    }
    Ok(StudentRanking {
        ranking: RankedList {
            query_id: query_id.into(),
            entries: idx.iter().map(|&i| (doc_ids[i].clone(), scores[i])).collect(),
        },
        reasons,
    })
}
