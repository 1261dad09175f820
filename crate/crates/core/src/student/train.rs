use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::example::DistillationExample;
use super::loss::{combined_grad, LossBreakdown};
use super::model::StudentParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size for the mix logits.
    pub mix_learning_rate: f64,
    /// Heavy-ball momentum; 0 gives plain gradient descent.
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            mix_learning_rate: 0.001,
            momentum: 0.9,
            seed: 42,
        }
    }
}

/// Mean component losses over one epoch (measured before each update) and the
/// mix weights at the end of the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub pairwise: f64,
    pub listwise: f64,
    pub generation: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Passed to the observer after every parameter update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub epoch: usize,
    pub step: usize,
    /// Index into the caller's example slice.
    pub example: usize,
    /// Loss before the update.
    pub loss: LossBreakdown,
    /// Mix weights after the update.
    pub weights: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: StudentParams,
    pub trace: Vec<EpochTrace>,
}

pub fn train(
    initial: StudentParams,
    examples: &[DistillationExample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_observer(initial, examples, config, |_| {})
}

/// Per-example gradient descent with momentum over a seeded shuffle.
///
/// A pure function of its inputs: the same seed gives bit-identical parameters.
pub fn train_with_observer<F: FnMut(&StepInfo)>(
    initial: StudentParams,
    examples: &[DistillationExample],
    config: &TrainConfig,
    mut observer: F,
) -> Result<TrainOutcome> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    let mut params = initial;
    let mut flat = params.flatten();
    let mut velocity = vec![0.0; flat.len()];
    let mix_start = flat.len() - 3;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 3];
        for &idx in &order {
            let (loss, grad) = match combined_grad(&params, &examples[idx]) {
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, example: idx }),
                other => other?,
            };
            if !loss.total.is_finite() || grad.0.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    example: idx,
                });
            }
            sums[0] += loss.pairwise;
            sums[1] += loss.listwise;
            sums[2] += loss.generation;
            for (i, ((theta, v), g)) in flat.iter_mut().zip(&mut velocity).zip(&grad.0).enumerate() {
                *v = config.momentum * *v + g;
                let lr = if i >= mix_start {
                    config.mix_learning_rate
                } else {
                    config.learning_rate
                };
                *theta -= lr * *v;
            }
            params.assign_flat(&flat)?;
            observer(&StepInfo {
                epoch,
                step,
                example: idx,
                loss,
                weights: params.mix_weights(),
            });
            step += 1;
        }
        let n = examples.len() as f64;
        let [alpha, beta, gamma] = params.mix_weights();
        trace.push(EpochTrace {
            epoch,
            pairwise: sums[0] / n,
            listwise: sums[1] / n,
            generation: sums[2] / n,
            alpha,
            beta,
            gamma,
        });
    }
    Ok(TrainOutcome { params, trace })
}
