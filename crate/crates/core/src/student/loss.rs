//! The three distillation losses, their mix, and analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use super::example::DistillationExample;
use super::model::{log_sum_exp, softmax, Gradient, StudentParams};
use crate::{Error, Result};

/// Hinge sum `sum over (i, j) in P of max(0, 1 - (s_i - s_j))`.
pub fn pairwise_loss(scores: &[f64], pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| (1.0 - (scores[i] - scores[j])).max(0.0))
        .sum()
}

/// `d pairwise_loss / d s`. At the hinge point the subgradient 0 is used.
pub fn pairwise_grad(scores: &[f64], pairs: &[(usize, usize)]) -> Vec<f64> {
    let mut g = vec![0.0; scores.len()];
    for &(i, j) in pairs {
        if 1.0 - (scores[i] - scores[j]) > 0.0 {
            g[i] -= 1.0;
            g[j] += 1.0;
        }
    }
    g
}

fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `KL(softmax(z) || softmax(s))`, evaluated with log-sum-exp.
pub fn listwise_loss(scores: &[f64], targets: &[f64]) -> Result<f64> {
    if scores.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            actual: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("empty score list".into()));
    }
    check_finite(scores, "scores")?;
    check_finite(targets, "targets")?;
    let lse_s = log_sum_exp(scores);
    let lse_z = log_sum_exp(targets);
    let kl: f64 = scores
        .iter()
        .zip(targets)
        .map(|(s, z)| {
            let log_q = z - lse_z;
            let log_p = s - lse_s;
            libm::exp(log_q) * (log_q - log_p)
        })
        .sum();
    // Rounding can leave a tiny negative value for identical distributions.
    Ok(kl.max(0.0))
}

/// `d listwise_loss / d s = softmax(s) - softmax(z)`.
pub fn listwise_grad(scores: &[f64], targets: &[f64]) -> Vec<f64> {
    let p = softmax(scores);
    let q = softmax(targets);
    p.iter().zip(&q).map(|(p, q)| p - q).collect()
}

/// Mean over documents of summed per-token cross-entropy.
///
/// `logits[d]` is the (position-independent) vocabulary distribution of
/// document `d`; `targets[d]` its reason token ids.
pub fn generation_loss(logits: &[Vec<f64>], targets: &[Vec<u32>]) -> Result<f64> {
    if logits.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            actual: logits.len(),
        });
    }
    if logits.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (r, y) in logits.iter().zip(targets) {
        check_finite(r, "reason logits")?;
        let lse = log_sum_exp(r);
        for &t in y {
            let v = r.get(t as usize).ok_or(Error::TokenOutOfRange {
                id: t,
                vocab: r.len(),
            })?;
            total += lse - v;
        }
    }
    Ok(total / logits.len() as f64)
}

/// `d generation_loss / d logits[d] = (T_d softmax(r_d) - counts_d) / n_docs`.
pub fn generation_logit_grad(logits: &[Vec<f64>], targets: &[Vec<u32>]) -> Vec<Vec<f64>> {
    let n = logits.len().max(1) as f64;
    logits
        .iter()
        .zip(targets)
        .map(|(r, y)| {
            let p = softmax(r);
            let t = y.len() as f64;
            let mut g: Vec<f64> = p.iter().map(|p| t * p / n).collect();
            for &tok in y {
                g[tok as usize] -= 1.0 / n;
            }
            g
        })
        .collect()
}

/// Which objective to evaluate or differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Pairwise,
    Listwise,
    Generation,
    /// `alpha * pairwise + beta * listwise + gamma * generation`.
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub pairwise: f64,
    pub listwise: f64,
    pub generation: f64,
    /// `(alpha, beta, gamma)`.
    pub weights: [f64; 3],
    pub total: f64,
}

struct Forward {
    scores: Vec<f64>,
    logits: Vec<Vec<f64>>,
    breakdown: LossBreakdown,
}

fn forward(params: &StudentParams, ex: &DistillationExample) -> Result<Forward> {
    let scores = ex
        .features
        .iter()
        .map(|f| params.score(f))
        .collect::<Result<Vec<f64>>>()?;
    let logits = ex
        .contexts
        .iter()
        .map(|c| params.generator.logits(c))
        .collect::<Result<Vec<_>>>()?;
    let pairwise = pairwise_loss(&scores, &ex.pairs);
    let listwise = listwise_loss(&scores, &ex.targets)?;
    let generation = generation_loss(&logits, &ex.reasons)?;
    let weights = params.mix_weights();
    let total = weights[0] * pairwise + weights[1] * listwise + weights[2] * generation;
    Ok(Forward {
        scores,
        logits,
        breakdown: LossBreakdown {
            pairwise,
            listwise,
            generation,
            weights,
            total,
        },
    })
}

pub fn combined_loss(params: &StudentParams, ex: &DistillationExample) -> Result<LossBreakdown> {
    forward(params, ex).map(|f| f.breakdown)
}

pub fn objective_value(params: &StudentParams, ex: &DistillationExample, objective: Objective) -> Result<f64> {
    let b = combined_loss(params, ex)?;
    Ok(match objective {
        Objective::Pairwise => b.pairwise,
        Objective::Listwise => b.listwise,
        Objective::Generation => b.generation,
        Objective::Combined => b.total,
    })
}

/// Loss breakdown and the gradient of `objective` with respect to every parameter.
///
/// Component objectives do not depend on the mix logits, so their gradient
/// there is zero. For the combined objective,
/// `d L / d lambda_k = w_k (L_k - L)`.
pub fn objective_grad(
    params: &StudentParams,
    ex: &DistillationExample,
    objective: Objective,
) -> Result<(LossBreakdown, Gradient)> {
    let fwd = forward(params, ex)?;
    let b = fwd.breakdown;
    let (w_pw, w_lw, w_gen) = match objective {
        Objective::Pairwise => (1.0, 0.0, 0.0),
        Objective::Listwise => (0.0, 1.0, 0.0),
        Objective::Generation => (0.0, 0.0, 1.0),
        Objective::Combined => (b.weights[0], b.weights[1], b.weights[2]),
    };
    let mut grad = params.zero_gradient();
    let g_off = params.generator_offset();
    let m_off = params.mix_offset();

    if w_pw != 0.0 || w_lw != 0.0 {
        let d_pw = pairwise_grad(&fwd.scores, &ex.pairs);
        let d_lw = listwise_grad(&fwd.scores, &ex.targets);
        let scorer_grad = &mut grad.0[..g_off];
        for (i, f) in ex.features.iter().enumerate() {
            let upstream = w_pw * d_pw[i] + w_lw * d_lw[i];
            if upstream != 0.0 {
                params.scorer.backprop(f, upstream, scorer_grad);
            }
        }
    }

    if w_gen != 0.0 {
        let d_logits = generation_logit_grad(&fwd.logits, &ex.reasons);
        let ctx_dim = params.generator.context_dim;
        let gen_grad = &mut grad.0[g_off..m_off];
        for (c, d_r) in ex.contexts.iter().zip(&d_logits) {
            for (v, &dv) in d_r.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                let row = &mut gen_grad[v * ctx_dim..(v + 1) * ctx_dim];
                for (g, x) in row.iter_mut().zip(c) {
                    *g += w_gen * dv * x;
                }
            }
        }
    }

    if objective == Objective::Combined {
        let losses = [b.pairwise, b.listwise, b.generation];
        for (k, (w, l)) in b.weights.iter().zip(losses).enumerate() {
            grad.0[m_off + k] = w * (l - b.total);
        }
    }
    Ok((b, grad))
}

pub fn combined_grad(params: &StudentParams, ex: &DistillationExample) -> Result<(LossBreakdown, Gradient)> {
    objective_grad(params, ex, Objective::Combined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::student::{ScorerKind, TargetSource};

    #[test]
    fn pairwise_examples() {
        let pairs = [(0, 1), (0, 2), (1, 2)];
        assert_eq!(pairwise_loss(&[3.0, 2.0, 1.0], &pairs), 0.0);
        assert_eq!(pairwise_loss(&[0.5, 0.5, 0.5], &pairs), 3.0);
        let v = pairwise_loss(&[2.0, 0.5, 0.2], &pairs);
        assert!((v - 0.7).abs() < 1e-12);
        assert_eq!(pairwise_grad(&[2.0, 0.5, 0.2], &pairs), vec![0.0, -1.0, 1.0]);
    }

    #[test]
    fn listwise_examples() {
        assert_eq!(listwise_loss(&[0.3, -1.0, 2.0], &[0.3, -1.0, 2.0]).unwrap(), 0.0);
        let v = listwise_loss(&[0.0, core::f64::consts::LN_2], &[0.0, 0.0]).unwrap();
        let expected = 0.5 * libm::log(1.5) + 0.5 * libm::log(0.75);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.05889).abs() < 1e-5);
        let shifted = listwise_loss(&[7.0, 7.0 + core::f64::consts::LN_2], &[0.0, 0.0]).unwrap();
        assert!((shifted - v).abs() < 1e-12);
        assert!(listwise_loss(&[f64::NAN], &[0.0]).is_err());
        assert!(listwise_loss(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn generation_examples() {
        let v = 7usize;
        let t = 5usize;
        let logits = vec![vec![0.0; v]; 3];
        let targets = vec![vec![1u32; t]; 3];
        let loss = generation_loss(&logits, &targets).unwrap();
        assert!((loss - t as f64 * libm::log(v as f64)).abs() < 1e-12);

        let mut sharp = vec![0.0; 4];
        sharp[2] = 50.0;
        assert!(generation_loss(&[sharp], &[vec![2, 2]]).unwrap() < 1e-9);

        assert_eq!(
            generation_loss(&[vec![0.0; 3]], &[vec![3]]),
            Err(Error::TokenOutOfRange { id: 3, vocab: 3 })
        );
    }

    #[test]
    fn generation_matches_naive_oracle() {
        let logits = vec![vec![0.3, -1.2, 2.0, 0.7, -0.4]];
        let targets = vec![vec![2u32, 0, 4]];
        let mut oracle = 0.0;
        let z: f64 = logits[0].iter().map(|v| libm::exp(*v)).sum();
        for &t in &targets[0] {
            oracle -= libm::log(libm::exp(logits[0][t as usize]) / z);
        }
        assert!((generation_loss(&logits, &targets).unwrap() - oracle).abs() < 1e-10);
    }

    fn tiny_example() -> DistillationExample {
        DistillationExample::new(
            "q",
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![1, 2, 0],
            vec![vec![2, 1], vec![3, 1], vec![1]],
            TargetSource::TeacherOrder,
            50,
        )
        .unwrap()
    }

    #[test]
    fn simplex_corner_and_center() {
        let mut p = StudentParams::init(ScorerKind::Linear, 2, 2, 4, 0);
        p.scorer = crate::student::Scorer::Linear { weights: vec![0.3, -0.2] };
        let ex = tiny_example();
        let b = combined_loss(&p, &ex).unwrap();
        let mean = (b.pairwise + b.listwise + b.generation) / 3.0;
        assert!((b.total - mean).abs() < 1e-12);
        p.mix_logits = [50.0, 0.0, 0.0];
        let b = combined_loss(&p, &ex).unwrap();
        let bound = 2.0 * libm::exp(-50.0) * (b.pairwise + b.listwise + b.generation) + 1e-15;
        assert!((b.total - b.pairwise).abs() < bound);
    }

    #[test]
    fn component_gradients_ignore_mix_logits() {
        let p = StudentParams::init(ScorerKind::Linear, 2, 2, 4, 0);
        let ex = tiny_example();
        let (_, g) = objective_grad(&p, &ex, Objective::Listwise).unwrap();
        let n = g.0.len();
        assert_eq!(&g.0[n - 3..], &[0.0, 0.0, 0.0]);
    }
}
