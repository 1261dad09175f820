use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| libm::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(x.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Linear,
    /// One tanh hidden layer of 32 units.
    Mlp,
}

pub const MLP_HIDDEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scorer {
    Linear {
        weights: Vec<f64>,
    },
    Mlp {
        hidden: usize,
        /// `hidden x dim`, row-major.
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
    },
}

impl Scorer {
    pub fn input_dim(&self) -> usize {
        match self {
            Scorer::Linear { weights } => weights.len(),
            Scorer::Mlp { hidden, w1, .. } => w1.len() / hidden,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Scorer::Linear { weights } => weights.len(),
            Scorer::Mlp { w1, b1, w2, .. } => w1.len() + b1.len() + w2.len(),
        }
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: features.len(),
            });
        }
        Ok(match self {
            Scorer::Linear { weights } => dot(weights, features),
            Scorer::Mlp { hidden, w1, b1, w2 } => {
                let dim = features.len();
                (0..*hidden)
                    .map(|k| w2[k] * libm::tanh(dot(&w1[k * dim..(k + 1) * dim], features) + b1[k]))
                    .sum()
            }
        })
    }

    /// Adds `upstream * d score / d theta` into `grad` (this scorer's flat slice).
    pub(crate) fn backprop(&self, features: &[f64], upstream: f64, grad: &mut [f64]) {
        match self {
            Scorer::Linear { .. } => {
                for (g, x) in grad.iter_mut().zip(features) {
                    *g += upstream * x;
                }
            }
            Scorer::Mlp { hidden, w1, b1, w2 } => {
                let dim = features.len();
                let h = *hidden;
                let (g_w1, rest) = grad.split_at_mut(h * dim);
                let (g_b1, g_w2) = rest.split_at_mut(h);
                for k in 0..h {
                    let a = libm::tanh(dot(&w1[k * dim..(k + 1) * dim], features) + b1[k]);
                    g_w2[k] += upstream * a;
                    let pre = upstream * w2[k] * (1.0 - a * a);
                    g_b1[k] += pre;
                    for (g, x) in g_w1[k * dim..(k + 1) * dim].iter_mut().zip(features) {
                        *g += pre * x;
                    }
                }
            }
        }
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            Scorer::Linear { weights } => out.extend_from_slice(weights),
            Scorer::Mlp { w1, b1, w2, .. } => {
                out.extend_from_slice(w1);
                out.extend_from_slice(b1);
                out.extend_from_slice(w2);
            }
        }
    }

    fn assign(&mut self, flat: &[f64]) {
        match self {
            Scorer::Linear { weights } => weights.copy_from_slice(flat),
            Scorer::Mlp { w1, b1, w2, .. } => {
                let (a, rest) = flat.split_at(w1.len());
                let (b, c) = rest.split_at(b1.len());
                w1.copy_from_slice(a);
                b1.copy_from_slice(b);
                w2.copy_from_slice(c);
            }
        }
    }
}

/// Bag-of-context linear generation head: `logits = W c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationHead {
    pub vocab_size: usize,
    pub context_dim: usize,
    /// `vocab_size x context_dim`, row-major.
    pub weights: Vec<f64>,
}

impl GenerationHead {
    pub fn zeros(vocab_size: usize, context_dim: usize) -> Self {
        Self {
            vocab_size,
            context_dim,
            weights: vec![0.0; vocab_size * context_dim],
        }
    }

    pub fn logits(&self, context: &[f64]) -> Result<Vec<f64>> {
        if context.len() != self.context_dim {
            return Err(Error::DimensionMismatch {
                expected: self.context_dim,
                actual: context.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.context_dim.max(1))
            .take(self.vocab_size)
            .map(|row| dot(row, context))
            .collect())
    }
}

/// Everything the student learns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentParams {
    pub scorer: Scorer,
    pub generator: GenerationHead,
    /// Logits of the (pairwise, listwise, generation) mixing weights.
    pub mix_logits: [f64; 3],
}

/// Flat gradient laid out like [`StudentParams::flatten`]: scorer, generator, mix logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl StudentParams {
    pub fn init(
        kind: ScorerKind,
        feature_dim: usize,
        context_dim: usize,
        vocab_size: usize,
        seed: u64,
    ) -> Self {
        let scorer = match kind {
            ScorerKind::Linear => Scorer::Linear {
                weights: vec![0.0; feature_dim],
            },
            ScorerKind::Mlp => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = 1.0 / libm::sqrt(feature_dim.max(1) as f64);
                Scorer::Mlp {
                    hidden: MLP_HIDDEN,
                    w1: (0..MLP_HIDDEN * feature_dim)
                        .map(|_| rng.gen_range(-scale..scale))
                        .collect(),
                    b1: vec![0.0; MLP_HIDDEN],
                    w2: (0..MLP_HIDDEN)
                        .map(|_| rng.gen_range(-0.1..0.1))
                        .collect(),
                }
            }
        };
        Self {
            scorer,
            generator: GenerationHead::zeros(vocab_size, context_dim),
            mix_logits: [0.0; 3],
        }
    }

    /// `(alpha, beta, gamma)`: softmax of the mix logits.
    pub fn mix_weights(&self) -> [f64; 3] {
        let w = softmax(&self.mix_logits);
        [w[0], w[1], w[2]]
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        self.scorer.score(features)
    }

    pub fn param_count(&self) -> usize {
        self.scorer.param_count() + self.generator.weights.len() + 3
    }

    pub(crate) fn generator_offset(&self) -> usize {
        self.scorer.param_count()
    }

    pub(crate) fn mix_offset(&self) -> usize {
        self.scorer.param_count() + self.generator.weights.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.scorer.flatten_into(&mut out);
        out.extend_from_slice(&self.generator.weights);
        out.extend_from_slice(&self.mix_logits);
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let g = self.generator_offset();
        let m = self.mix_offset();
        self.scorer.assign(&flat[..g]);
        self.generator.weights.copy_from_slice(&flat[g..m]);
        self.mix_logits.copy_from_slice(&flat[m..]);
        Ok(())
    }

    pub fn zero_gradient(&self) -> Gradient {
        Gradient(vec![0.0; self.param_count()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_score_zero() {
        let p = StudentParams::init(ScorerKind::Linear, 3, 4, 5, 0);
        assert_eq!(p.score(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
        assert!(p.score(&[1.0]).is_err());
    }

    #[test]
    fn equal_logits_give_thirds() {
        let p = StudentParams::init(ScorerKind::Linear, 1, 1, 2, 0);
        let w = p.mix_weights();
        for v in w {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn flatten_roundtrip() {
        let mut p = StudentParams::init(ScorerKind::Mlp, 3, 2, 4, 7);
        let mut flat = p.flatten();
        assert_eq!(flat.len(), p.param_count());
        flat.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64);
        p.assign_flat(&flat).unwrap();
        assert_eq!(p.flatten(), flat);
        assert_eq!(p.mix_logits, [flat[flat.len() - 3], flat[flat.len() - 2], flat[flat.len() - 1]]);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[1.0, 2.0, 3.0]);
        let b = softmax(&[1001.0, 1002.0, 1003.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
