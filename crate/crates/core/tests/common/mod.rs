//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use planminer::cnn::{batch_loss, dropout_mask, param_gradients, CnnParams, EmbeddingMode, SentenceInput};
use planminer::features::FeatureVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// min over b of the mean hinge loss, by evaluating every breakpoint.
pub fn best_hinge(scores: &[f64], ys: &[i8]) -> f64 {
    let hinge = |b: f64| -> f64 {
        scores
            .iter()
            .zip(ys)
            .map(|(s, &y)| (1.0 - f64::from(y) * (s + b)).max(0.0))
            .sum::<f64>()
            / scores.len() as f64
    };
    scores
        .iter()
        .zip(ys)
        .map(|(s, &y)| hinge(f64::from(y) - s))
        .fold(f64::INFINITY, f64::min)
}

/// Primal optimum for 2-D data by repeated grid refinement over w.
pub fn grid_oracle(pts: &[[f64; 2]], ys: &[i8], c: f64) -> f64 {
    let lambda = 1.0 / (c * pts.len() as f64);
    let f = |w: [f64; 2]| {
        let scores: Vec<f64> = pts.iter().map(|p| w[0] * p[0] + w[1] * p[1]).collect();
        lambda / 2.0 * (w[0] * w[0] + w[1] * w[1]) + best_hinge(&scores, ys)
    };
    let mut center = [0.0, 0.0];
    let mut half = 2.0 / lambda.sqrt();
    let steps = 40;
    let mut best = f(center);
    while half > 1e-9 {
        let mut arg = center;
        for i in 0..=steps {
            for j in 0..=steps {
                let w = [
                    center[0] - half + 2.0 * half * i as f64 / steps as f64,
                    center[1] - half + 2.0 * half * j as f64 / steps as f64,
                ];
                let v = f(w);
                if v < best {
                    best = v;
                    arg = w;
                }
            }
        }
        center = arg;
        half *= 0.5;
    }
    best
}

pub fn to_vectors(pts: &[[f64; 2]]) -> Vec<FeatureVector> {
    pts.iter()
        .map(|p| FeatureVector::new(2, vec![(0, p[0]), (1, p[1])]).unwrap())
        .collect()
}

pub fn svm_instances() -> Vec<(Vec<[f64; 2]>, Vec<i8>)> {
    let mut out = vec![
        (
            vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5], [-1.0, 0.2], [0.5, -1.0], [1.5, 2.0]],
            vec![-1, 1, 1, -1, -1, 1],
        ),
        (
            vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.5, 0.5]],
            vec![1, 1, -1, -1, -1],
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    while out.len() < 8 {
        let n = rng.gen_range(4..=8);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let mut ys: Vec<i8> = pts
            .iter()
            .map(|p| {
                if p[0] + 0.5 * p[1] + rng.gen_range(-0.8..0.8) > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        ys[0] = 1;
        ys[1] = -1;
        out.push((pts, ys));
    }
    out
}

pub fn separable_instance() -> (Vec<[f64; 2]>, Vec<i8>) {
    (
        vec![
            [2.0, 1.0],
            [1.5, 2.0],
            [3.0, 0.0],
            [-1.0, -1.0],
            [-2.0, 0.5],
            [0.0, -2.0],
        ],
        vec![1, 1, 1, -1, -1, -1],
    )
}

/// Exact two-sided Fisher p-value by enumerating every table with the
/// observed margins in integer arithmetic.
pub fn fisher_enumerated(a: u64, b: u64, c: u64, d: u64) -> f64 {
    fn choose(n: u64, k: u64) -> u128 {
        (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
    }
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let weight = |x: u64| choose(r1, x) * choose(r2, c1 - x);
    let observed = weight(a);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let hit: u128 = (lo..=hi).map(weight).filter(|&w| w <= observed).sum();
    hit as f64 / choose(n, c1) as f64
}

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-5;
/// Central differences carry roughly 1e-12 of rounding noise, so near-zero
/// gradients are compared against this scale instead of their own size.
pub const FD_FLOOR: f64 = 1e-6;

pub struct GradCase {
    pub params: CnnParams,
    pub batch: Vec<SentenceInput>,
    pub labels: Vec<bool>,
    pub masks: Option<Vec<Vec<f64>>>,
    pub l2: f64,
}

pub fn grad_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 4;
    let vocab = rng.gen_range(4..9);
    let global_dims: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(1..4)).collect();
    let global_rows: Vec<usize> = global_dims.iter().map(|_| rng.gen_range(1..4)).collect();
    let mut params = CnnParams::random(dim, &[2, 3, 4], 2, vocab, &global_rows, &global_dims, &mut rng);
    // Larger filter weights keep max-pooling and ReLU away from ties.
    for f in &mut params.filters {
        f.iter_mut().for_each(|v| *v *= 3.0);
    }
    for b in &mut params.filter_bias {
        b.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
    }
    let n = rng.gen_range(1..5);
    let batch: Vec<SentenceInput> = (0..n)
        .map(|_| {
            let len = rng.gen_range(4..9);
            let mut tokens: Vec<usize> = (0..len).map(|_| rng.gen_range(1..vocab)).collect();
            if rng.gen_bool(0.3) {
                tokens[len - 1] = 0;
            }
            SentenceInput {
                tokens,
                globals: global_rows.iter().map(|&r| rng.gen_range(0..r)).collect(),
            }
        })
        .collect();
    let labels = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let masks = rng.gen_bool(0.7).then(|| {
        (0..n)
            .map(|_| dropout_mask(params.input_len(), 0.5, &mut rng))
            .collect()
    });
    GradCase {
        params,
        batch,
        labels,
        masks,
        l2: if rng.gen_bool(0.5) {
            rng.gen_range(0.0..0.1)
        } else {
            0.0
        },
    }
}

impl GradCase {
    pub fn loss(&self, p: &CnnParams) -> f64 {
        batch_loss(p, &self.batch, &self.labels, self.masks.as_deref(), self.l2).unwrap()
    }

    pub fn gradients(&self, mode: EmbeddingMode) -> CnnParams {
        param_gradients(
            &self.params,
            &self.batch,
            &self.labels,
            self.masks.as_deref(),
            self.l2,
            mode,
        )
        .unwrap()
        .1
    }
}

pub struct FdReport {
    pub checked: usize,
    pub worst: f64,
    pub failure: Option<String>,
}

/// Compares every analytic coordinate with a central difference. The pad
/// row is not a parameter and must carry an exactly zero gradient.
pub fn check_gradients(seed: u64) -> FdReport {
    let c = grad_case(seed);
    let grads = c.gradients(EmbeddingMode::Random);
    let analytic: Vec<Vec<f64>> = grads.groups().iter().map(|g| g.to_vec()).collect();
    let mut report = FdReport {
        checked: 0,
        worst: 0.0,
        failure: None,
    };
    for (gi, group) in analytic.iter().enumerate() {
        for (k, &a) in group.iter().enumerate() {
            if gi == 0 && k < c.params.dim {
                if a != 0.0 {
                    report.failure = Some(format!("seed {seed}: pad row gradient {a:e}"));
                    return report;
                }
                continue;
            }
            let mut plus = c.params.clone();
            plus.groups_mut()[gi][k] += FD_STEP;
            let mut minus = c.params.clone();
            minus.groups_mut()[gi][k] -= FD_STEP;
            let numeric = (c.loss(&plus) - c.loss(&minus)) / (2.0 * FD_STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            report.worst = report.worst.max(rel);
            report.checked += 1;
            if rel > FD_TOL && report.failure.is_none() {
                report.failure = Some(format!(
                    "seed {seed} group {gi} index {k}: analytic {a:e} numeric {numeric:e} rel {rel:e}"
                ));
            }
        }
    }
    report
}
