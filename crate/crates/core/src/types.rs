//! Corpus, topic and judgment types shared by every stage.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest relevance grade accepted; keeps `2^grade - 1` gains well inside f64 precision.
pub const MAX_GRADE: u32 = 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

/// Graded relevance judgments keyed by `(query_id, doc_id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment. A second grade for the same pair is rejected.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Result<()> {
        if grade > MAX_GRADE {
            return Err(Error::InvalidArgument(alloc::format!(
                "grade {grade} exceeds maximum {MAX_GRADE}"
            )));
        }
        let per_query = self.grades.entry(query_id.into()).or_default();
        if per_query.contains_key(doc_id) {
            return Err(Error::InvalidArgument(alloc::format!(
                "duplicate judgment for ({query_id}, {doc_id})"
            )));
        }
        per_query.insert(doc_id.into(), grade);
        Ok(())
    }

    /// Grade of a document, with unjudged documents counting as 0.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.grades.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All judgments in `(query_id, doc_id)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.grades.iter().flat_map(|(q, m)| {
            m.iter()
                .map(move |(d, g)| (q.as_str(), d.as_str(), *g))
        })
    }
}

/// A scored ordering of documents for one query.
///
/// Scores are non-increasing and doc ids are unique; ties keep doc ids ascending
/// unless the producer imposes its own tie order (e.g. first-stage rank).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            entries: Vec::new(),
        }
    }

    /// Builds a list from unordered scores, sorting by score descending then doc id ascending.
    pub fn from_scores(query_id: impl Into<String>, mut scored: Vec<(String, f64)>) -> Self {
        scored.sort_by(by_score_then_id);
        Self {
            query_id: query_id.into(),
            entries: scored,
        }
    }

    /// Builds a list from an already-ordered sequence; scores count down from `n`.
    pub fn from_order<I, S>(query_id: impl Into<String>, order: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = order.into_iter().map(Into::into).collect();
        let n = ids.len();
        let entries = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, (n - i) as f64))
            .collect();
        Self {
            query_id: query_id.into(),
            entries,
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(d, _)| d.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks the sortedness and uniqueness invariants.
    pub fn is_valid(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.entries.iter().all(|(d, _)| seen.insert(d.as_str()))
            && self.entries.windows(2).all(|w| w[0].1 >= w[1].1)
    }
}

pub(crate) fn by_score_then_id(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}
