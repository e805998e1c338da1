//! Linear SVM trained with Pegasos-style stochastic subgradient descent.
//!
//! Minimizes `(λ/2)‖w‖² + (1/n) Σ max(0, 1 − yᵢ(w·xᵢ + b))` with
//! `λ = 1/(C·n)` and step `1/(λt)`. The bias is not regularized. Iterates are
//! averaged over the second half of training. At every epoch end the running
//! average, with its bias set to the exact minimizer for those weights, is
//! scored on the objective and the best one seen is returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const SVM_FORMAT: &str = "plan-miner-svm";
pub const SVM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmTrainConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            c: 1.0,
            epochs: 20,
            seed: 0,
            shuffle: true,
        }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: SvmTrainConfig,
}

/// Serialized form of a [`LinearModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmModelFile {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: SvmTrainConfig,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            config: SvmTrainConfig::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &FeatureVector) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    pub fn to_file(&self) -> SvmModelFile {
        SvmModelFile {
            format: SVM_FORMAT.to_string(),
            version: SVM_VERSION,
            dim: self.dim(),
            weights: self.weights.clone(),
            bias: self.bias,
            config: self.config,
        }
    }

    pub fn from_file(file: SvmModelFile) -> Result<Self> {
        if file.format != SVM_FORMAT || file.version != SVM_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        if file.weights.len() != file.dim {
            return Err(Error::DimensionMismatch {
                expected: file.dim,
                found: file.weights.len(),
            });
        }
        if !file.bias.is_finite() || file.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("model contains non-finite parameters".into()));
        }
        Ok(LinearModel {
            weights: file.weights,
            bias: file.bias,
            config: file.config,
        })
    }
}

/// Label `+1` when the margin is strictly positive, else `−1`, with the margin.
pub fn predict(model: &LinearModel, x: &FeatureVector) -> Result<(i8, f64)> {
    let m = model.margin(x)?;
    Ok((if m > 0.0 { 1 } else { -1 }, m))
}

/// Exact primal objective.
pub fn objective(model: &LinearModel, xs: &[FeatureVector], ys: &[i8], c: f64) -> Result<f64> {
    check_inputs(xs, ys, model.dim())?;
    let n = xs.len() as f64;
    let lambda = 1.0 / (c * n);
    let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * lambda / 2.0;
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        loss += (1.0 - f64::from(y) * model.margin(x)?).max(0.0);
    }
    Ok(reg + loss / n)
}

fn check_inputs(xs: &[FeatureVector], ys: &[i8], dim: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if let Some(x) = xs.iter().find(|x| x.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.dim(),
        });
    }
    if ys.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::Contract("labels must be +1 or -1".into()));
    }
    Ok(())
}

/// Bias minimizing the mean hinge loss for fixed margins `scores[i] = w·xᵢ`.
///
/// The loss is piecewise linear in `b` with one breakpoint per example; the
/// slope climbs by one at each breakpoint from `−#pos`, so the optimum is the
/// interval between the `#pos`-th and `#pos+1`-th sorted breakpoints. Its
/// midpoint is returned.
pub fn optimal_bias(scores: &[f64], ys: &[i8]) -> f64 {
    let n_pos = ys.iter().filter(|&&y| y > 0).count();
    let mut bps: Vec<f64> = scores.iter().zip(ys).map(|(s, &y)| f64::from(y) - s).collect();
    bps.sort_by(f64::total_cmp);
    match n_pos {
        0 => bps.first().copied().unwrap_or(0.0),
        p if p == bps.len() => bps[p - 1],
        p => (bps[p - 1] + bps[p]) / 2.0,
    }
}

/// Objective of the retained averaged model after each averaged epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub epoch_objectives: Vec<f64>,
}

pub fn train(xs: &[FeatureVector], ys: &[i8], cfg: &SvmTrainConfig) -> Result<LinearModel> {
    train_traced(xs, ys, cfg, false).map(|(m, _)| m)
}

pub fn train_traced(
    xs: &[FeatureVector],
    ys: &[i8],
    cfg: &SvmTrainConfig,
    trace: bool,
) -> Result<(LinearModel, TrainTrace)> {
    cfg.validate()?;
    let dim = xs.first().map_or(0, FeatureVector::dim);
    check_inputs(xs, ys, dim)?;
    if !(ys.contains(&1) && ys.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    let n = xs.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();

    // w = scale · v keeps the shrink step O(1).
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut b = 0.0;
    let mut avg_w = vec![0.0; dim];
    let mut avg_b = 0.0;
    let mut averaged = 0usize;
    let avg_from = cfg.epochs / 2;
    let mut t = 0usize;
    let mut epoch_objectives = Vec::new();
    let mut best: Option<(LinearModel, f64)> = None;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = f64::from(ys[i]);
            let m = scale * xs[i].dot(&v) + b;
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if y * m < 1.0 {
                for &(j, val) in xs[i].entries() {
                    v[j] += eta * y * val / scale;
                }
                b += eta * y;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                scale = 1.0;
            }
            if epoch >= avg_from {
                averaged += 1;
                let k = 1.0 / averaged as f64;
                for (a, &vj) in avg_w.iter_mut().zip(&v) {
                    *a += (scale * vj - *a) * k;
                }
                avg_b += (b - avg_b) * k;
            }
        }
        if averaged > 0 {
            let mut candidate = LinearModel {
                weights: avg_w.clone(),
                bias: avg_b,
                config: *cfg,
            };
            candidate.bias = refit_bias(&candidate, xs, ys);
            let obj = objective(&candidate, xs, ys, cfg.c)?;
            if best.as_ref().is_none_or(|(_, o)| obj < *o) {
                best = Some((candidate, obj));
            }
            if trace {
                epoch_objectives.push(best.as_ref().map_or(obj, |(_, o)| *o));
            }
        }
    }
    let (model, _) = best.expect("at least one epoch is averaged");
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(Error::Contract("training diverged".into()));
    }
    Ok((model, TrainTrace { epoch_objectives }))
}

fn refit_bias(model: &LinearModel, xs: &[FeatureVector], ys: &[i8]) -> f64 {
    let scores: Vec<f64> = xs.iter().map(|x| x.dot(&model.weights)).collect();
    optimal_bias(&scores, ys)
}
