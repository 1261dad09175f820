use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Most pairs kept per query; closest-rank pairs are kept first.
pub const DEFAULT_MAX_PAIRS: usize = 50;

/// Where listwise targets and preference pairs come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSource {
    /// Linear decay along the teacher order: `z = (n - rank) / n`, rank 1-based.
    TeacherOrder,
    /// Relevance grades, one per candidate, used directly as `z`.
    Grades(Vec<u32>),
}

/// One training query: candidates, their features, and what the teacher said.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationExample {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    /// Scorer input per candidate.
    pub features: Vec<Vec<f64>>,
    /// Generation-head input per candidate.
    pub contexts: Vec<Vec<f64>>,
    /// Candidate indices, best first.
    pub teacher_order: Vec<usize>,
    /// Listwise target per candidate.
    pub targets: Vec<f64>,
    /// Target reason token ids per candidate, EOS-terminated.
    pub reasons: Vec<Vec<u32>>,
    /// `(i, j)`: candidate `i` is strictly preferred to `j`.
    pub pairs: Vec<(usize, usize)>,
}

impl DistillationExample {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        query_id: impl Into<String>,
        doc_ids: Vec<String>,
        features: Vec<Vec<f64>>,
        contexts: Vec<Vec<f64>>,
        teacher_order: Vec<usize>,
        reasons: Vec<Vec<u32>>,
        source: TargetSource,
        max_pairs: usize,
    ) -> Result<Self> {
        let n = doc_ids.len();
        if n == 0 {
            return Err(Error::InvalidArgument("example without candidates".into()));
        }
        for len in [features.len(), contexts.len(), reasons.len(), teacher_order.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        let mut seen = vec![false; n];
        for &i in &teacher_order {
            if i >= n || core::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(
                    "teacher order is not a permutation of the candidates".into(),
                ));
            }
        }

        let (targets, preference_order, grades) = match source {
            TargetSource::TeacherOrder => {
                let mut z = vec![0.0; n];
                for (pos, &i) in teacher_order.iter().enumerate() {
                    z[i] = (n - (pos + 1)) as f64 / n as f64;
                }
                let grades: Vec<f64> = z.clone();
                (z, teacher_order.clone(), grades)
            }
            TargetSource::Grades(g) => {
                if g.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: g.len(),
                    });
                }
                let mut order = teacher_order.clone();
                // Stable: equal grades keep the teacher's relative order.
                order.sort_by(|&a, &b| g[b].cmp(&g[a]));
                let z: Vec<f64> = g.iter().map(|&v| f64::from(v)).collect();
                (z.clone(), order, z)
            }
        };

        let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let (i, j) = (preference_order[a], preference_order[b]);
                if grades[i] > grades[j] {
                    pairs.push((b - a, a, b));
                }
            }
        }
        pairs.sort_unstable();
        pairs.truncate(max_pairs);
        let pairs = pairs
            .into_iter()
            .map(|(_, a, b)| (preference_order[a], preference_order[b]))
            .collect();

        Ok(Self {
            query_id: query_id.into(),
            doc_ids,
            features,
            contexts,
            teacher_order,
            targets,
            reasons,
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }
}
