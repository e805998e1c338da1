//! Convolutional sentence classifier: word embeddings, parallel filter widths
//! with ReLU and 1-max pooling, sentence-level global feature embeddings
//! concatenated after pooling, dropout, and a two-way softmax.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingMatrix, OOV_BOUND};
use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::util::read_to_string;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const MODEL_FORMAT: &str = "plan-miner-cnn";
pub const MODEL_VERSION: u32 = 1;

/// Examples per gradient chunk. Chunks are reduced in order, so results do
/// not depend on the number of worker threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Random,
    PretrainedStatic,
    PretrainedTuned,
}

impl EmbeddingMode {
    pub fn tunes_embeddings(self) -> bool {
        self != EmbeddingMode::PretrainedStatic
    }

    pub fn is_pretrained(self) -> bool {
        self != EmbeddingMode::Random
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    /// Embedding size per global feature family; empty disables global features.
    pub global_feature_dims: Vec<usize>,
    pub dropout_p: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub dev_fraction: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub embedding_mode: EmbeddingMode,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embedding_dim: 200,
            filter_widths: vec![2, 3, 4],
            filters_per_width: 100,
            global_feature_dims: vec![8; 4],
            dropout_p: 0.5,
            l2_lambda: 1e-4,
            batch_size: 64,
            dev_fraction: 0.10,
            max_epochs: 50,
            patience: 5,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 7,
            embedding_mode: EmbeddingMode::PretrainedTuned,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("cnn: {m}")));
        if self.embedding_dim == 0 || self.filters_per_width == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("embedding_dim, filters_per_width, batch_size and max_epochs must be positive");
        }
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return bad("filter_widths must be non-empty and positive");
        }
        if self.global_feature_dims.contains(&0) {
            return bad("global_feature_dims must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must be in [0, 1)");
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 0.5) {
            return bad("dev_fraction must be in (0, 0.5)");
        }
        if !(self.l2_lambda >= 0.0 && self.learning_rate > 0.0 && self.adam_eps > 0.0) {
            return bad("l2_lambda must be non-negative, learning_rate and adam_eps positive");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("adam betas must be in [0, 1)");
        }
        Ok(())
    }

    pub fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }
}

/// Token and global-feature indices for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInput {
    pub tokens: Vec<usize>,
    pub globals: Vec<usize>,
}

/// All trainable tensors, stored flat. Gradients and optimizer moments use
/// the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub dim: usize,
    pub widths: Vec<usize>,
    pub n_filters: usize,
    pub global_dims: Vec<usize>,
    /// vocabulary rows × dim; row 0 is the pad and stays zero.
    pub embeddings: Vec<f64>,
    /// Per family: rows × global_dims[f].
    pub global_tables: Vec<Vec<f64>>,
    /// Per width w: n_filters × w × dim.
    pub filters: Vec<Vec<f64>>,
    pub filter_bias: Vec<Vec<f64>>,
    /// 2 × input_len, class-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

impl CnnParams {
    pub fn zeros(
        dim: usize,
        widths: &[usize],
        n_filters: usize,
        vocab_rows: usize,
        global_rows: &[usize],
        global_dims: &[usize],
    ) -> Self {
        let mut p = CnnParams {
            dim,
            widths: widths.to_vec(),
            n_filters,
            global_dims: global_dims.to_vec(),
            embeddings: vec![0.0; vocab_rows * dim],
            global_tables: global_rows
                .iter()
                .zip(global_dims)
                .map(|(r, d)| vec![0.0; r * d])
                .collect(),
            filters: widths.iter().map(|w| vec![0.0; n_filters * w * dim]).collect(),
            filter_bias: widths.iter().map(|_| vec![0.0; n_filters]).collect(),
            dense_w: Vec::new(),
            dense_b: vec![0.0; 2],
        };
        p.dense_w = vec![0.0; 2 * p.input_len()];
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for g in z.groups_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Random initialization: uniform ±0.25 embeddings, Glorot-uniform
    /// filters and dense weights, zero biases.
    pub fn random(
        dim: usize,
        widths: &[usize],
        n_filters: usize,
        vocab_rows: usize,
        global_rows: &[usize],
        global_dims: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut p = CnnParams::zeros(dim, widths, n_filters, vocab_rows, global_rows, global_dims);
        for v in p.embeddings.iter_mut().skip(dim) {
            *v = rng.gen_range(-OOV_BOUND..=OOV_BOUND);
        }
        for t in &mut p.global_tables {
            t.iter_mut().for_each(|v| *v = rng.gen_range(-OOV_BOUND..=OOV_BOUND));
        }
        for (f, &w) in p.filters.iter_mut().zip(widths) {
            let a = (6.0 / (w * dim + n_filters) as f64).sqrt();
            f.iter_mut().for_each(|v| *v = rng.gen_range(-a..=a));
        }
        let a = (6.0 / (p.input_len() + 2) as f64).sqrt();
        p.dense_w.iter_mut().for_each(|v| *v = rng.gen_range(-a..=a));
        p
    }

    pub fn pooled_len(&self) -> usize {
        self.widths.len() * self.n_filters
    }

    pub fn input_len(&self) -> usize {
        self.pooled_len() + self.global_dims.iter().sum::<usize>()
    }

    pub fn vocab_rows(&self) -> usize {
        self.embeddings.len() / self.dim
    }

    pub fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    /// Parameter groups in a fixed order; the word embeddings come first.
    pub fn groups(&self) -> Vec<&[f64]> {
        let mut g: Vec<&[f64]> = vec![&self.embeddings];
        g.extend(self.global_tables.iter().map(Vec::as_slice));
        g.extend(self.filters.iter().map(Vec::as_slice));
        g.extend(self.filter_bias.iter().map(Vec::as_slice));
        g.push(&self.dense_w);
        g.push(&self.dense_b);
        g
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut g: Vec<&mut [f64]> = vec![&mut self.embeddings];
        g.extend(self.global_tables.iter_mut().map(Vec::as_mut_slice));
        g.extend(self.filters.iter_mut().map(Vec::as_mut_slice));
        g.extend(self.filter_bias.iter_mut().map(Vec::as_mut_slice));
        g.push(&mut self.dense_w);
        g.push(&mut self.dense_b);
        g
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|v| v.is_finite()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.groups().iter().flat_map(|g| g.iter()).map(|v| v * v).sum()
    }

    fn add_assign(&mut self, other: &CnnParams) {
        for (a, b) in self.groups_mut().into_iter().zip(other.groups()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn check_input(&self, input: &SentenceInput) -> Result<()> {
        if input.tokens.len() < self.max_width() {
            return Err(Error::Contract(format!(
                "sentence has {} tokens, fewer than the widest filter ({})",
                input.tokens.len(),
                self.max_width()
            )));
        }
        if let Some(&t) = input.tokens.iter().find(|&&t| t >= self.vocab_rows()) {
            return Err(Error::Contract(format!("token index {t} outside vocabulary")));
        }
        if input.globals.len() != self.global_tables.len() {
            return Err(Error::DimensionMismatch {
                expected: self.global_tables.len(),
                found: input.globals.len(),
            });
        }
        for ((&id, table), &d) in input.globals.iter().zip(&self.global_tables).zip(&self.global_dims) {
            if id * d >= table.len() {
                return Err(Error::Contract(format!("global feature index {id} outside its table")));
            }
        }
        Ok(())
    }
}

/// Inverted-dropout mask: each unit is zeroed with probability `p` and the
/// survivors are scaled by 1/(1-p).
pub fn dropout_mask(len: usize, p: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

struct Trace {
    /// Maximum pre-activation per pooled unit and where it occurred.
    pooled_pre: Vec<f64>,
    argmax: Vec<usize>,
    /// Concatenated pooled + global vector before dropout.
    z: Vec<f64>,
    log_probs: [f64; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_softmax(l: [f64; 2]) -> [f64; 2] {
    let m = l[0].max(l[1]);
    let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
    [l[0] - lse, l[1] - lse]
}

fn forward_trace(p: &CnnParams, input: &SentenceInput, mask: Option<&[f64]>) -> Trace {
    let dim = p.dim;
    let len = input.tokens.len();
    let mut pooled_pre = Vec::with_capacity(p.pooled_len());
    let mut argmax = Vec::with_capacity(p.pooled_len());
    let rows: Vec<&[f64]> = input
        .tokens
        .iter()
        .map(|&t| &p.embeddings[t * dim..(t + 1) * dim])
        .collect();
    for (wi, &w) in p.widths.iter().enumerate() {
        let filters = &p.filters[wi];
        for f in 0..p.n_filters {
            let filter = &filters[f * w * dim..(f + 1) * w * dim];
            let (mut best, mut at) = (f64::NEG_INFINITY, 0);
            for t in 0..=len - w {
                let a: f64 = (0..w).map(|o| dot(&filter[o * dim..(o + 1) * dim], rows[t + o])).sum();
                if a > best {
                    best = a;
                    at = t;
                }
            }
            pooled_pre.push(best + p.filter_bias[wi][f]);
            argmax.push(at);
        }
    }
    let mut z: Vec<f64> = pooled_pre.iter().map(|v| v.max(0.0)).collect();
    for ((&id, table), &d) in input.globals.iter().zip(&p.global_tables).zip(&p.global_dims) {
        z.extend_from_slice(&table[id * d..(id + 1) * d]);
    }
    let n = z.len();
    let mut logits = [p.dense_b[0], p.dense_b[1]];
    for (c, l) in logits.iter_mut().enumerate() {
        let w = &p.dense_w[c * n..(c + 1) * n];
        *l += match mask {
            Some(m) => z.iter().zip(m).zip(w).map(|((z, m), w)| z * m * w).sum::<f64>(),
            None => dot(&z, w),
        };
    }
    Trace {
        pooled_pre,
        argmax,
        z,
        log_probs: log_softmax(logits),
    }
}

/// Class probabilities [nonplan, plan]. `dropout` is a mask from
/// [`dropout_mask`] in training mode and `None` at inference.
pub fn forward(params: &CnnParams, input: &SentenceInput, dropout: Option<&[f64]>) -> Result<[f64; 2]> {
    params.check_input(input)?;
    if let Some(m) = dropout {
        if m.len() != params.input_len() {
            return Err(Error::DimensionMismatch {
                expected: params.input_len(),
                found: m.len(),
            });
        }
    }
    let lp = forward_trace(params, input, dropout).log_probs;
    Ok([lp[0].exp(), lp[1].exp()])
}

/// Plan iff its probability is strictly larger; returns the label and P(plan).
pub fn predict(params: &CnnParams, input: &SentenceInput) -> Result<(bool, f64)> {
    let [p0, p1] = forward(params, input, None)?;
    Ok((p1 > p0, p1))
}

#[allow(clippy::too_many_arguments)]
fn backward(
    p: &CnnParams,
    input: &SentenceInput,
    tr: &Trace,
    mask: Option<&[f64]>,
    label: bool,
    scale: f64,
    tune_embeddings: bool,
    g: &mut CnnParams,
) {
    let dim = p.dim;
    let n = tr.z.len();
    let y = [f64::from(u8::from(!label)), f64::from(u8::from(label))];
    let dl = [
        (tr.log_probs[0].exp() - y[0]) * scale,
        (tr.log_probs[1].exp() - y[1]) * scale,
    ];
    let m = |i: usize| mask.map_or(1.0, |m| m[i]);
    let mut dz = vec![0.0; n];
    for c in 0..2 {
        g.dense_b[c] += dl[c];
        let w = &p.dense_w[c * n..(c + 1) * n];
        let gw = &mut g.dense_w[c * n..(c + 1) * n];
        for i in 0..n {
            let mi = m(i);
            gw[i] += dl[c] * tr.z[i] * mi;
            dz[i] += w[i] * dl[c] * mi;
        }
    }
    for (wi, &w) in p.widths.iter().enumerate() {
        for f in 0..p.n_filters {
            let j = wi * p.n_filters + f;
            if tr.pooled_pre[j] <= 0.0 || dz[j] == 0.0 {
                continue;
            }
            let d = dz[j];
            g.filter_bias[wi][f] += d;
            let t0 = tr.argmax[j];
            for o in 0..w {
                let tok = input.tokens[t0 + o];
                let at = (f * w + o) * dim;
                let row = &p.embeddings[tok * dim..(tok + 1) * dim];
                for (gf, e) in g.filters[wi][at..at + dim].iter_mut().zip(row) {
                    *gf += d * e;
                }
                if tune_embeddings && tok != PAD {
                    let filt = &p.filters[wi][at..at + dim];
                    for (ge, fv) in g.embeddings[tok * dim..(tok + 1) * dim].iter_mut().zip(filt) {
                        *ge += d * fv;
                    }
                }
            }
        }
    }
    let mut off = p.pooled_len();
    for ((&id, table), &d) in input.globals.iter().zip(&mut g.global_tables).zip(&p.global_dims) {
        for k in 0..d {
            table[id * d + k] += dz[off + k];
        }
        off += d;
    }
}

fn l2_term(p: &CnnParams, l2_lambda: f64) -> f64 {
    0.5 * l2_lambda * p.dense_w.iter().map(|v| v * v).sum::<f64>()
}

fn check_batch(params: &CnnParams, batch: &[SentenceInput], labels: &[bool], masks: Option<&[Vec<f64>]>) -> Result<()> {
    if batch.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: batch.len(),
        });
    }
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if let Some(ms) = masks {
        if ms.len() != batch.len() || ms.iter().any(|m| m.len() != params.input_len()) {
            return Err(Error::DimensionMismatch {
                expected: params.input_len(),
                found: ms.first().map_or(0, Vec::len),
            });
        }
    }
    batch.iter().try_for_each(|x| params.check_input(x))
}

/// Mean cross-entropy plus (l2_lambda/2)·‖dense weights‖², under fixed dropout masks.
pub fn batch_loss(
    params: &CnnParams,
    batch: &[SentenceInput],
    labels: &[bool],
    masks: Option<&[Vec<f64>]>,
    l2_lambda: f64,
) -> Result<f64> {
    check_batch(params, batch, labels, masks)?;
    let ce: f64 = batch
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (x, &y))| {
            let tr = forward_trace(params, x, masks.map(|m| m[i].as_slice()));
            -tr.log_probs[usize::from(y)]
        })
        .sum();
    Ok(ce / batch.len() as f64 + l2_term(params, l2_lambda))
}

/// Loss and exact gradients of [`batch_loss`] for every parameter group.
/// The pad row never receives gradient, and neither do the word embeddings
/// when `mode` keeps them static.
pub fn param_gradients(
    params: &CnnParams,
    batch: &[SentenceInput],
    labels: &[bool],
    masks: Option<&[Vec<f64>]>,
    l2_lambda: f64,
    mode: EmbeddingMode,
) -> Result<(f64, CnnParams)> {
    check_batch(params, batch, labels, masks)?;
    let scale = 1.0 / batch.len() as f64;
    let tune = mode.tunes_embeddings();
    let items: Vec<usize> = (0..batch.len()).collect();
    let partial: Vec<(f64, CnnParams)> = items
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut loss = 0.0;
            for &i in chunk {
                let mask = masks.map(|m| m[i].as_slice());
                let tr = forward_trace(params, &batch[i], mask);
                loss -= tr.log_probs[usize::from(labels[i])];
                backward(params, &batch[i], &tr, mask, labels[i], scale, tune, &mut g);
            }
            (loss, g)
        })
        .collect();
    let mut parts = partial.into_iter();
    let (mut loss, mut grads) = parts.next().expect("batch is non-empty");
    for (l, g) in parts {
        loss += l;
        grads.add_assign(&g);
    }
    for (gw, w) in grads.dense_w.iter_mut().zip(&params.dense_w) {
        *gw += l2_lambda * w;
    }
    Ok((loss * scale + l2_term(params, l2_lambda), grads))
}

struct Adam {
    m: CnnParams,
    v: CnnParams,
    t: i32,
}

impl Adam {
    fn new(p: &CnnParams) -> Self {
        Adam {
            m: p.zeros_like(),
            v: p.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, p: &mut CnnParams, g: &CnnParams, cfg: &CnnConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let skip_first = !cfg.embedding_mode.tunes_embeddings();
        let groups = p
            .groups_mut()
            .into_iter()
            .zip(g.groups())
            .zip(self.m.groups_mut())
            .zip(self.v.groups_mut());
        for (k, (((pg, gg), mg), vg)) in groups.enumerate() {
            if k == 0 && skip_first {
                continue;
            }
            for i in 0..pg.len() {
                let gi = gg[i];
                mg[i] = b1 * mg[i] + (1.0 - b1) * gi;
                vg[i] = b2 * vg[i] + (1.0 - b2) * gi * gi;
                pg[i] -= cfg.learning_rate * (mg[i] / c1) / ((vg[i] / c2).sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// A training sentence before indexing: tokens, one value per global
/// feature family, and the noisy label.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnExample {
    pub tokens: Vec<String>,
    pub globals: Vec<String>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_micro_f1: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,dev_micro_f1,stopped\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6},{}", r.epoch, r.train_loss, r.dev_micro_f1, r.stopped);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub vocabulary: Vocabulary,
    /// Per global family; index 0 is the unknown value.
    pub global_vocabularies: Vec<Vocabulary>,
    pub params: CnnParams,
}

impl CnnModel {
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], globals: &[S]) -> SentenceInput {
        let mut ids: Vec<usize> = tokens
            .iter()
            .map(|t| self.vocabulary.get(t.as_ref()).unwrap_or(UNK))
            .collect();
        if ids.len() < self.params.max_width() {
            ids.resize(self.params.max_width(), PAD);
        }
        let globals = self
            .global_vocabularies
            .iter()
            .enumerate()
            .map(|(f, v)| globals.get(f).and_then(|g| v.get(g.as_ref())).unwrap_or(0))
            .collect();
        SentenceInput { tokens: ids, globals }
    }

    pub fn predict(&self, input: &SentenceInput) -> Result<(bool, f64)> {
        predict(&self.params, input)
    }

    pub fn to_file(&self) -> CnnModelFile {
        let p = &self.params;
        let rows = |data: &[f64], width: usize| data.chunks(width).map(<[f64]>::to_vec).collect::<Vec<_>>();
        CnnModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            vocabulary: self.vocabulary.names().to_vec(),
            global_vocabularies: self.global_vocabularies.iter().map(|v| v.names().to_vec()).collect(),
            tensors: CnnTensors {
                embeddings: rows(&p.embeddings, p.dim),
                global_tables: p
                    .global_tables
                    .iter()
                    .zip(&p.global_dims)
                    .map(|(t, &d)| rows(t, d))
                    .collect(),
                filters: p
                    .filters
                    .iter()
                    .zip(&p.widths)
                    .map(|(f, &w)| f.chunks(w * p.dim).map(|one| rows(one, p.dim)).collect())
                    .collect(),
                filter_bias: p.filter_bias.clone(),
                dense_weights: rows(&p.dense_w, p.input_len()),
                dense_bias: p.dense_b.clone(),
            },
        }
    }

    pub fn from_file(file: CnnModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "unsupported model {:?} version {}",
                file.format, file.version
            )));
        }
        let cfg = file.config;
        cfg.validate()?;
        let t = file.tensors;
        let global_rows: Vec<usize> = t.global_tables.iter().map(Vec::len).collect();
        let mut p = CnnParams::zeros(
            cfg.embedding_dim,
            &cfg.filter_widths,
            cfg.filters_per_width,
            t.embeddings.len(),
            &global_rows,
            &cfg.global_feature_dims,
        );
        let fill = |dst: &mut Vec<f64>, src: Vec<f64>| -> Result<()> {
            if src.len() != dst.len() {
                return Err(Error::DimensionMismatch {
                    expected: dst.len(),
                    found: src.len(),
                });
            }
            *dst = src;
            Ok(())
        };
        let flat2 = |v: Vec<Vec<f64>>| v.into_iter().flatten().collect::<Vec<f64>>();
        fill(&mut p.embeddings, flat2(t.embeddings))?;
        if t.global_tables.len() != p.global_tables.len()
            || t.filters.len() != p.filters.len()
            || t.filter_bias.len() != p.filter_bias.len()
        {
            return Err(Error::Config("model tensors do not match the configuration".into()));
        }
        for (dst, src) in p.global_tables.iter_mut().zip(t.global_tables) {
            fill(dst, flat2(src))?;
        }
        for (dst, src) in p.filters.iter_mut().zip(t.filters) {
            fill(dst, src.into_iter().flat_map(flat2).collect())?;
        }
        for (dst, src) in p.filter_bias.iter_mut().zip(t.filter_bias) {
            fill(dst, src)?;
        }
        fill(&mut p.dense_w, flat2(t.dense_weights))?;
        fill(&mut p.dense_b, t.dense_bias)?;
        if !p.is_finite() {
            return Err(Error::Config("model tensors must be finite".into()));
        }
        if file.vocabulary.len() != p.vocab_rows() || file.global_vocabularies.len() != p.global_tables.len() {
            return Err(Error::Config("vocabulary sizes do not match the tensors".into()));
        }
        Ok(CnnModel {
            config: cfg,
            vocabulary: Vocabulary::from_names(file.vocabulary),
            global_vocabularies: file
                .global_vocabularies
                .into_iter()
                .map(Vocabulary::from_names)
                .collect(),
            params: p,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = read_to_string(path.as_ref())?;
        CnnModel::from_file(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnTensors {
    pub embeddings: Vec<Vec<f64>>,
    pub global_tables: Vec<Vec<Vec<f64>>>,
    /// [width][filter][offset][dim]
    pub filters: Vec<Vec<Vec<Vec<f64>>>>,
    pub filter_bias: Vec<Vec<f64>>,
    /// [class][input]
    pub dense_weights: Vec<Vec<f64>>,
    pub dense_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModelFile {
    pub format: String,
    pub version: u32,
    pub config: CnnConfig,
    pub vocabulary: Vec<String>,
    pub global_vocabularies: Vec<Vec<String>>,
    pub tensors: CnnTensors,
}

/// Stratified split: about `dev_fraction` of each class, at least one, goes to dev.
fn stratified_split(labels: &[bool], dev_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let n_dev = ((idx.len() as f64 * dev_fraction).round() as usize).clamp(1, idx.len() - 1);
        dev.extend_from_slice(&idx[..n_dev]);
        train.extend_from_slice(&idx[n_dev..]);
    }
    train.sort_unstable();
    dev.sort_unstable();
    (train, dev)
}

fn accuracy(params: &CnnParams, inputs: &[SentenceInput], labels: &[bool]) -> Result<f64> {
    let hits = inputs
        .par_iter()
        .zip(labels)
        .map(|(x, &y)| predict(params, x).map(|(p, _)| usize::from(p == y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / inputs.len() as f64)
}

/// Trains with a seeded stratified dev split and early stopping on dev
/// micro-F1 (accuracy, for two classes). Returns the best-dev-epoch model.
pub fn train(
    examples: &[CnnExample],
    cfg: &CnnConfig,
    pretrained: Option<&EmbeddingMatrix>,
) -> Result<(CnnModel, TrainingLog)> {
    cfg.validate()?;
    if examples.len() < 20 {
        return Err(Error::Contract(format!(
            "need at least 20 examples, got {}",
            examples.len()
        )));
    }
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos < 2 || n_pos + 2 > labels.len() {
        return Err(Error::SingleClass);
    }
    let families = cfg.global_feature_dims.len();
    if families > 0 {
        if let Some(e) = examples.iter().find(|e| e.globals.len() != families) {
            return Err(Error::DimensionMismatch {
                expected: families,
                found: e.globals.len(),
            });
        }
    }
    let pretrained = match (cfg.embedding_mode.is_pretrained(), pretrained) {
        (false, _) => None,
        (true, None) => return Err(Error::Config("pretrained embedding mode needs vectors".into())),
        (true, Some(m)) if m.dim() != cfg.embedding_dim => {
            return Err(Error::DimensionMismatch {
                expected: cfg.embedding_dim,
                found: m.dim(),
            })
        }
        (true, Some(m)) => Some(m),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, dev_idx) = stratified_split(&labels, cfg.dev_fraction, &mut rng);

    let mut vocabulary = Vocabulary::new();
    vocabulary.intern(PAD_TOKEN);
    vocabulary.intern(UNK_TOKEN);
    let mut global_vocabularies = vec![Vocabulary::new(); families];
    for v in &mut global_vocabularies {
        v.intern(UNK_TOKEN);
    }
    for &i in &train_idx {
        for t in &examples[i].tokens {
            vocabulary.intern(t);
        }
        for (v, g) in global_vocabularies.iter_mut().zip(&examples[i].globals) {
            v.intern(g);
        }
    }
    vocabulary.freeze();
    global_vocabularies.iter_mut().for_each(Vocabulary::freeze);

    let global_rows: Vec<usize> = global_vocabularies.iter().map(Vocabulary::len).collect();
    let mut params = CnnParams::random(
        cfg.embedding_dim,
        &cfg.filter_widths,
        cfg.filters_per_width,
        vocabulary.len(),
        &global_rows,
        &cfg.global_feature_dims,
        &mut rng,
    );
    if let Some(m) = pretrained {
        for (i, word) in vocabulary.names().iter().enumerate().skip(UNK) {
            params.embeddings[i * cfg.embedding_dim..(i + 1) * cfg.embedding_dim].copy_from_slice(&m.lookup(word));
        }
    }
    let mut model = CnnModel {
        config: cfg.clone(),
        vocabulary,
        global_vocabularies,
        params,
    };
    let encode = |i: &usize| model.encode(&examples[*i].tokens, &examples[*i].globals);
    let train_x: Vec<SentenceInput> = train_idx.iter().map(encode).collect();
    let train_y: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
    let dev_x: Vec<SentenceInput> = dev_idx.iter().map(encode).collect();
    let dev_y: Vec<bool> = dev_idx.iter().map(|&i| labels[i]).collect();

    let mut adam = Adam::new(&model.params);
    let mut best = (f64::NEG_INFINITY, model.params.clone());
    let mut log = TrainingLog::default();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0);
        for batch_idx in order.chunks(cfg.batch_size) {
            let xs: Vec<SentenceInput> = batch_idx.iter().map(|&i| train_x[i].clone()).collect();
            let ys: Vec<bool> = batch_idx.iter().map(|&i| train_y[i]).collect();
            let masks: Vec<Vec<f64>> = (0..xs.len())
                .map(|_| dropout_mask(model.params.input_len(), cfg.dropout_p, &mut rng))
                .collect();
            let (loss, grads) =
                param_gradients(&model.params, &xs, &ys, Some(&masks), cfg.l2_lambda, cfg.embedding_mode)?;
            adam.step(&mut model.params, &grads, cfg);
            loss_sum += loss * xs.len() as f64;
            seen += xs.len();
        }
        let dev_f1 = accuracy(&model.params, &dev_x, &dev_y)?;
        if dev_f1 > best.0 {
            best = (dev_f1, model.params.clone());
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        let stopped = stale > cfg.patience || epoch == cfg.max_epochs;
        log.rows.push(LogRow {
            epoch,
            train_loss: loss_sum / seen as f64,
            dev_micro_f1: dev_f1,
            stopped,
        });
        log::debug!(
            "cnn epoch {epoch}: loss {:.4} dev {:.4}",
            loss_sum / seen as f64,
            dev_f1
        );
        if stopped {
            break;
        }
    }
    if !model.params.is_finite() {
        return Err(Error::Contract("training diverged to non-finite parameters".into()));
    }
    model.params = best.1;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64, global_dims: &[usize]) -> CnnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<usize> = global_dims.iter().map(|_| 3).collect();
        CnnParams::random(4, &[2, 3, 4], 2, 8, &rows, global_dims, &mut rng)
    }

    fn input(tokens: &[usize], globals: &[usize]) -> SentenceInput {
        SentenceInput {
            tokens: tokens.to_vec(),
            globals: globals.to_vec(),
        }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let p = CnnParams::zeros(4, &[2, 3, 4], 2, 8, &[], &[]);
        let probs = forward(&p, &input(&[2, 3, 4, 5], &[]), None).unwrap();
        assert_eq!(probs, [0.5, 0.5]);
        assert_eq!(predict(&p, &input(&[2, 3, 4, 5], &[])).unwrap(), (false, 0.5));
    }

    #[test]
    fn pooled_vector_has_one_unit_per_filter() {
        let p = CnnParams::zeros(200, &[2, 3, 4], 100, 10, &[], &[]);
        assert_eq!(p.pooled_len(), 300);
        let tr = forward_trace(&p, &input(&[1, 2, 3, 4, 5, 6, 7], &[]), None);
        assert_eq!(tr.z.len(), 300);
        // Valid convolution over 7 tokens: 6, 5 and 4 windows.
        assert!(tr.argmax.iter().take(100).all(|&t| t < 6));
        assert!(tr.argmax.iter().skip(200).all(|&t| t < 4));
    }

    #[test]
    fn pooled_value_is_the_max_window_activation() {
        let p = tiny(5, &[]);
        let x = input(&[2, 3, 4, 5, 6, 7, 1], &[]);
        let tr = forward_trace(&p, &x, None);
        for (wi, &w) in p.widths.iter().enumerate() {
            for f in 0..p.n_filters {
                let filt = &p.filters[wi][f * w * 4..(f + 1) * w * 4];
                let windows: Vec<f64> = (0..=x.tokens.len() - w)
                    .map(|t| {
                        (0..w)
                            .map(|o| dot(&filt[o * 4..(o + 1) * 4], &p.embeddings[x.tokens[t + o] * 4..][..4]))
                            .sum::<f64>()
                            + p.filter_bias[wi][f]
                    })
                    .collect();
                let max = windows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(tr.pooled_pre[wi * p.n_filters + f], max);
            }
        }
    }

    #[test]
    fn short_inputs_and_bad_indices_are_contract_errors() {
        let p = tiny(1, &[3]);
        assert!(matches!(
            forward(&p, &input(&[2, 3, 4], &[0]), None),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            forward(&p, &input(&[2, 3, 4, 99], &[0]), None),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            forward(&p, &input(&[2, 3, 4, 5], &[3]), None),
            Err(Error::Contract(_))
        ));
        assert!(forward(&p, &input(&[2, 3, 4, 5], &[]), None).is_err());
    }

    #[test]
    fn probabilities_are_normalized_over_many_seeds() {
        for seed in 0..100 {
            let p = tiny(seed, &[3, 2]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let len = rng.gen_range(4..10);
            let toks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..8)).collect();
            let x = input(&toks, &[rng.gen_range(0..3), rng.gen_range(0..3)]);
            let mask = dropout_mask(p.input_len(), 0.5, &mut rng);
            for m in [None, Some(mask.as_slice())] {
                let pr = forward(&p, &x, m).unwrap();
                assert!(pr.iter().all(|&v| v > 0.0 && v < 1.0));
                assert!((pr[0] + pr[1] - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let p = tiny(9, &[3]);
        let x = input(&[2, 3, 4, 5, 6], &[1]);
        assert_eq!(forward(&p, &x, None).unwrap(), forward(&p, &x, None).unwrap());
    }

    #[test]
    fn predict_reports_plan_probability() {
        let mut p = CnnParams::zeros(4, &[2], 1, 4, &[], &[]);
        p.dense_b = vec![0.0, (9.0f64).ln()];
        let (label, prob) = predict(&p, &input(&[2, 3], &[])).unwrap();
        assert!(label);
        assert!((prob - 0.9).abs() < 1e-12);
    }

    #[test]
    fn static_mode_leaves_embeddings_without_gradient() {
        let p = tiny(2, &[3]);
        let xs = vec![input(&[2, 3, 4, 5], &[1]), input(&[6, 7, 1, 0], &[2])];
        let (_, g) = param_gradients(&p, &xs, &[true, false], None, 1e-4, EmbeddingMode::PretrainedStatic).unwrap();
        assert!(g.embeddings.iter().all(|&v| v == 0.0));
        let (_, g) = param_gradients(&p, &xs, &[true, false], None, 1e-4, EmbeddingMode::PretrainedTuned).unwrap();
        assert!(g.embeddings.iter().any(|&v| v != 0.0));
        assert!(g.embeddings[..4].iter().all(|&v| v == 0.0), "pad row must stay fixed");
    }

    #[test]
    fn saturated_correct_predictions_have_vanishing_gradient() {
        let mut p = tiny(3, &[]);
        p.dense_w.iter_mut().for_each(|v| *v = 0.0);
        p.dense_b = vec![-40.0, 40.0];
        let xs = vec![input(&[2, 3, 4, 5], &[]), input(&[5, 6, 7, 2], &[])];
        let (_, g) = param_gradients(&p, &xs, &[true, true], None, 0.0, EmbeddingMode::Random).unwrap();
        assert!(g.squared_norm().sqrt() < 1e-6);
    }

    #[test]
    fn gradients_do_not_depend_on_chunking() {
        let p = tiny(4, &[3]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<SentenceInput> = (0..20)
            .map(|_| {
                input(
                    &(0..6).map(|_| rng.gen_range(1..8)).collect::<Vec<_>>(),
                    &[rng.gen_range(0..3)],
                )
            })
            .collect();
        let ys: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let (l1, g1) = param_gradients(&p, &xs, &ys, None, 1e-3, EmbeddingMode::Random).unwrap();
        let (l2, g2) = param_gradients(&p, &xs, &ys, None, 1e-3, EmbeddingMode::Random).unwrap();
        assert_eq!((l1, &g1), (l2, &g2));
        let direct = batch_loss(&p, &xs, &ys, None, 1e-3).unwrap();
        assert!((direct - l1).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(CnnConfig::default().validate().is_ok());
        for cfg in [
            CnnConfig {
                dropout_p: 1.0,
                ..CnnConfig::default()
            },
            CnnConfig {
                dev_fraction: 0.5,
                ..CnnConfig::default()
            },
            CnnConfig {
                filter_widths: vec![],
                ..CnnConfig::default()
            },
            CnnConfig {
                batch_size: 0,
                ..CnnConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn stratified_split_keeps_both_classes_in_dev() {
        let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (train, dev) = stratified_split(&labels, 0.1, &mut rng);
        assert_eq!(train.len() + dev.len(), 40);
        assert!(dev.iter().any(|&i| labels[i]) && dev.iter().any(|&i| !labels[i]));
    }
}
