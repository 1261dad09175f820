use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reasonrank_core::student::{
    objective_grad, objective_value, DistillationExample, Objective, ScorerKind, StudentParams,
    TargetSource,
};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_instance(seed: u64, kind: ScorerKind) -> (StudentParams, DistillationExample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..8);
    let dim = rng.gen_range(2..7);
    let ctx = rng.gen_range(2..5);
    let vocab = rng.gen_range(3..9);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let contexts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..ctx).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let reasons: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..5);
            (0..len).map(|_| rng.gen_range(0..vocab as u32)).collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let ex = DistillationExample::new(
        format!("q{seed}"),
        (0..n).map(|i| format!("d{i}")).collect(),
        features,
        contexts,
        order,
        reasons,
        TargetSource::TeacherOrder,
        50,
    )
    .unwrap();

    let mut params = StudentParams::init(kind, dim, ctx, vocab, seed);
    let mut flat = params.flatten();
    for v in flat.iter_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    params.assign_flat(&flat).unwrap();
    (params, ex)
}

fn numeric_grad(params: &StudentParams, ex: &DistillationExample, obj: Objective) -> Vec<f64> {
    let base = params.flatten();
    let mut p = params.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut x = base.clone();
        x[i] = base[i] + H;
        p.assign_flat(&x).unwrap();
        let up = objective_value(&p, ex, obj).unwrap();
        x[i] = base[i] - H;
        p.assign_flat(&x).unwrap();
        let down = objective_value(&p, ex, obj).unwrap();
        out.push((up - down) / (2.0 * H));
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn check(kind: ScorerKind) {
    let objectives = [
        Objective::Pairwise,
        Objective::Listwise,
        Objective::Generation,
        Objective::Combined,
    ];
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let (params, ex) = random_instance(seed, kind);
        for obj in objectives {
            let (_, analytic) = objective_grad(&params, &ex, obj).unwrap();
            let numeric = numeric_grad(&params, &ex, obj);
            let e = rel_error(&analytic.0, &numeric);
            assert!(e <= TOL, "{kind:?} {obj:?} seed {seed}: relative error {e:e}");
            worst = worst.max(e);
        }
    }
    println!("{kind:?}: worst relative error {worst:e}");
}

#[test]
fn linear_scorer_gradients_match_finite_differences() {
    check(ScorerKind::Linear);
}

#[test]
fn mlp_scorer_gradients_match_finite_differences() {
    check(ScorerKind::Mlp);
}

#[test]
fn mix_logit_gradient_is_nonzero_off_the_centre() {
    let (params, ex) = random_instance(3, ScorerKind::Linear);
    let (b, g) = objective_grad(&params, &ex, Objective::Combined).unwrap();
    let m = g.0.len() - 3;
    let sum: f64 = g.0[m..].iter().sum();
    // softmax Jacobian rows sum to zero
    assert!(sum.abs() < 1e-12);
    assert!(b.total.is_finite());
    assert!(g.0[m..].iter().any(|v| v.abs() > 0.0));
}
