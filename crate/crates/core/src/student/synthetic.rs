//! A linear-teacher task: the teacher orders candidates by a hidden linear
//! function of their features, and describes each candidate by its most
//! influential features.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::example::{DistillationExample, TargetSource, DEFAULT_MAX_PAIRS};
use super::features::generation_context;
use super::model::{ScorerKind, StudentParams};
use super::vocab::{GenerationVocab, EOS};
use crate::types::Qrels;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub queries: usize,
    pub docs_per_query: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            queries: 100,
            docs_per_query: 10,
            feature_dim: 8,
            seed: 7,
        }
    }
}

/// Features named by a reason token: token `2 + 2j` means feature `j` pushed
/// the score up, `3 + 2j` that it pulled it down.
pub const REASON_FEATURES: usize = 3;

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub examples: Vec<DistillationExample>,
    pub hidden_weights: Vec<f64>,
    pub vocab: GenerationVocab,
}

impl SyntheticTask {
    pub fn generate(cfg: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dim = cfg.feature_dim;
        let hidden: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vocab = GenerationVocab::synthetic(2 + 2 * dim);
        let examples = (0..cfg.queries)
            .map(|q| {
                let n = cfg.docs_per_query;
                let features: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let utility: Vec<f64> = features
                    .iter()
                    .map(|x| x.iter().zip(&hidden).map(|(a, b)| a * b).sum())
                    .collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| utility[b].partial_cmp(&utility[a]).unwrap());
                let reasons = features.iter().map(|x| reason_tokens(x, &hidden)).collect();
                let contexts = features.iter().map(|x| generation_context(&[], x)).collect();
                DistillationExample::new(
                    alloc::format!("q{q}"),
                    (0..n).map(|d| alloc::format!("q{q}_d{d}")).collect(),
                    features,
                    contexts,
                    order,
                    reasons,
                    TargetSource::TeacherOrder,
                    DEFAULT_MAX_PAIRS,
                )
                .expect("generated example is well-formed")
            })
            .collect();
        Self {
            examples,
            hidden_weights: hidden,
            vocab,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden_weights.len()
    }

    pub fn initial_params(&self, kind: ScorerKind, seed: u64) -> StudentParams {
        StudentParams::init(kind, self.feature_dim(), self.feature_dim() + 1, self.vocab.len(), seed)
    }

    /// Teacher order as graded judgments: position `p` of `n` gets grade `n - p`.
    pub fn teacher_qrels(&self) -> Qrels {
        let mut q = Qrels::new();
        for ex in &self.examples {
            let n = ex.len();
            for (pos, &i) in ex.teacher_order.iter().enumerate() {
                let grade = (n - pos).min(crate::types::MAX_GRADE as usize) as u32;
                q.insert(&ex.query_id, &ex.doc_ids[i], grade)
                    .expect("unique synthetic doc ids");
            }
        }
        q
    }
}

fn reason_tokens(x: &[f64], hidden: &[f64]) -> Vec<u32> {
    let mut contrib: Vec<(usize, f64)> = x.iter().zip(hidden).map(|(a, b)| a * b).enumerate().collect();
    contrib.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
    let mut ids: Vec<u32> = contrib
        .iter()
        .take(REASON_FEATURES)
        .map(|&(j, c)| 2 + 2 * j as u32 + u32::from(c < 0.0))
        .collect();
    ids.push(EOS);
    ids
}

/// Renders a synthetic reason as text, for text-quality metrics.
pub fn describe(vocab: &GenerationVocab, ids: &[u32]) -> String {
    vocab.decode(ids)
}
