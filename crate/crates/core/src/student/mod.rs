//! The distilled student reranker.
//!
//! A small differentiable scorer plus a bag-of-context generation head,
//! trained on teacher orders and reasons with a pairwise hinge loss, a
//! listwise KL loss and a token cross-entropy loss. The three are mixed by
//! weights `(alpha, beta, gamma) = softmax(mix_logits)`, which are learned
//! along with everything else.

mod example;
mod features;
mod loss;
mod model;
mod rerank;
pub mod synthetic;
mod train;
mod vocab;

pub use example::{DistillationExample, TargetSource, DEFAULT_MAX_PAIRS};
pub use features::{generation_context, FeatureExtractor, FeatureInput, BASE_FEATURES};
pub use loss::{
    combined_grad, combined_loss, generation_logit_grad, generation_loss, listwise_grad,
    listwise_loss, objective_grad, objective_value, pairwise_grad, pairwise_loss, LossBreakdown,
    Objective,
};
pub use model::{softmax, Gradient, GenerationHead, Scorer, ScorerKind, StudentParams};
pub use rerank::{decode_reason, rerank_student, StudentRanking, MAX_REASON_TOKENS};
pub use train::{train, train_with_observer, EpochTrace, StepInfo, TrainConfig, TrainOutcome};
pub use vocab::{GenerationVocab, EOS, UNK};
