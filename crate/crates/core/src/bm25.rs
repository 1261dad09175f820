//! Okapi BM25 over an in-memory inverted index.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::text::tokenize;
use crate::types::{by_score_then_id, Document, RankedList};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Term → postings map plus the per-document statistics BM25 needs.
///
/// Postings are sorted by document ordinal. Documents keep the corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    terms: BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
}

impl InvertedIndex {
    pub fn build(corpus: &[Document]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut terms: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        for (ordinal, doc) in corpus.iter().enumerate() {
            let tokens = tokenize(&doc.text);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                terms.entry(t).or_default().push(Posting {
                    doc: ordinal as u32,
                    tf: n,
                });
            }
        }
        let doc_ids = corpus.iter().map(|d| d.doc_id.clone()).collect();
        Self::from_parts(terms, doc_ids, doc_lengths)
    }

    /// Reassembles an index from its stored parts, re-checking every invariant.
    pub fn from_parts(
        terms: BTreeMap<String, Vec<Posting>>,
        doc_ids: Vec<String>,
        doc_lengths: Vec<u32>,
    ) -> Result<Self> {
        if doc_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if doc_ids.len() != doc_lengths.len() {
            return Err(Error::DimensionMismatch {
                expected: doc_ids.len(),
                actual: doc_lengths.len(),
            });
        }
        let n = doc_ids.len() as u32;
        for (term, postings) in &terms {
            let sorted = postings.windows(2).all(|w| w[0].doc < w[1].doc);
            if !sorted || postings.iter().any(|p| p.doc >= n || p.tf == 0) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "corrupt postings for term {term:?}"
                )));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avgdl = total as f64 / doc_lengths.len() as f64;
        Ok(Self {
            terms,
            doc_ids,
            doc_lengths,
            avgdl,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_length(&self, ordinal: usize) -> u32 {
        self.doc_lengths[ordinal]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.terms.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.terms.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn postings_count(&self) -> usize {
        self.terms.values().map(Vec::len).sum()
    }

    pub fn tf(&self, term: &str, ordinal: usize) -> u32 {
        let postings = self.postings(term);
        postings
            .binary_search_by_key(&(ordinal as u32), |p| p.doc)
            .map(|i| postings[i].tf)
            .unwrap_or(0)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always non-negative.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.df(term) as f64;
        libm::log1p((n - df + 0.5) / (df + 0.5))
    }

    fn term_weight(&self, idf: f64, tf: u32, ordinal: usize, params: Bm25Params) -> f64 {
        let tf = f64::from(tf);
        let len_norm = if self.avgdl > 0.0 {
            f64::from(self.doc_lengths[ordinal]) / self.avgdl
        } else {
            1.0
        };
        idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * len_norm))
    }

    /// BM25 score of one document. Query terms absent from the index contribute 0.
    pub fn score(&self, query_tokens: &[String], ordinal: usize, params: Bm25Params) -> f64 {
        query_tokens
            .iter()
            .map(|t| {
                let tf = self.tf(t, ordinal);
                if tf == 0 {
                    0.0
                } else {
                    self.term_weight(self.idf(t), tf, ordinal, params)
                }
            })
            .sum()
    }

    /// Scores every document term-at-a-time.
    pub fn score_all(&self, query_tokens: &[String], params: Bm25Params) -> Vec<f64> {
        let mut acc = vec![0.0; self.doc_count()];
        for t in query_tokens {
            let idf = self.idf(t);
            for p in self.postings(t) {
                acc[p.doc as usize] += self.term_weight(idf, p.tf, p.doc as usize, params);
            }
        }
        acc
    }

    /// Top `k` documents with positive score, ties broken by doc id ascending.
    pub fn retrieve_top_k(
        &self,
        query_id: &str,
        query_text: &str,
        k: usize,
        params: Bm25Params,
    ) -> RankedList {
        let tokens = tokenize(query_text);
        let mut hits: Vec<(String, f64)> = self
            .score_all(&tokens, params)
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0.0)
            .map(|(i, s)| (self.doc_ids[i].clone(), s))
            .collect();
        hits.sort_by(by_score_then_id);
        hits.truncate(k);
        RankedList {
            query_id: query_id.into(),
            entries: hits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            doc_id: id.into(),
            text: text.into(),
            title: None,
        }
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn two_doc_statistics() {
        let idx = InvertedIndex::build(&[doc("d1", "a b"), doc("d2", "b c")]).unwrap();
        assert_eq!(idx.df("a"), 1);
        assert_eq!(idx.df("b"), 2);
        assert_eq!(idx.df("c"), 1);
        assert_eq!(idx.avgdl(), 2.0);
    }

    #[test]
    fn single_doc_avgdl() {
        let idx = InvertedIndex::build(&[doc("d1", "one two three")]).unwrap();
        assert_eq!(idx.avgdl(), 3.0);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert_eq!(InvertedIndex::build(&[]), Err(Error::EmptyCorpus));
    }

    #[test]
    fn hand_evaluated_scores() {
        let idx = InvertedIndex::build(&[doc("d1", "a b"), doc("d2", "b c")]).unwrap();
        let p = Bm25Params::default();
        let sb1 = idx.score(&toks("b"), 0, p);
        let sb2 = idx.score(&toks("b"), 1, p);
        assert_eq!(sb1, sb2);
        let sa = idx.score(&toks("a"), 0, p);
        assert!((sa - core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(idx.score(&toks("a"), 1, p), 0.0);
        assert_eq!(idx.score(&toks("zzz"), 0, p), 0.0);
    }

    #[test]
    fn retrieval_edge_cases() {
        let idx = InvertedIndex::build(&[doc("d1", "a b"), doc("d2", "b c"), doc("d3", "x")])
            .unwrap();
        let p = Bm25Params::default();
        let all = idx.retrieve_top_k("q", "b", 100, p);
        assert_eq!(all.doc_ids().collect::<Vec<_>>(), ["d1", "d2"]);
        assert!(idx.retrieve_top_k("q", "nothing here", 5, p).is_empty());
        assert_eq!(idx.retrieve_top_k("q", "a b c", 1, p).len(), 1);
    }

    #[test]
    fn postings_match_naive_scan() {
        // 1000 synthetic docs over a 37-word vocabulary
        let words: Vec<String> = (0..37).map(|i| alloc::format!("w{i}")).collect();
        let mut state = 12345u64;
        let corpus: Vec<Document> = (0..1000)
            .map(|i| {
                let len = 1 + (i % 13);
                let text: Vec<&str> = (0..len)
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        words[(state >> 33) as usize % words.len()].as_str()
                    })
                    .collect();
                doc(&i.to_string(), &text.join(" "))
            })
            .collect();
        let idx = InvertedIndex::build(&corpus).unwrap();
        let mut naive = 0;
        for d in &corpus {
            let mut toks = tokenize(&d.text);
            toks.sort();
            toks.dedup();
            naive += toks.len();
        }
        assert_eq!(idx.postings_count(), naive);
        let df_sum: usize = idx.terms().map(|(_, p)| p.len()).sum();
        assert_eq!(df_sum, naive);
        let total: u32 = idx.doc_lengths().iter().sum();
        assert!((idx.avgdl() - f64::from(total) / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn from_parts_rejects_bad_postings() {
        let mut terms = BTreeMap::new();
        terms.insert("a".to_string(), vec![Posting { doc: 5, tf: 1 }]);
        assert!(InvertedIndex::from_parts(terms, vec!["d".into()], vec![1]).is_err());
    }
}
