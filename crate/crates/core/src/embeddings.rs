//! Word vectors: word2vec text I/O, skip-gram with negative sampling, and
//! hash-seeded vectors for out-of-vocabulary words.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{fnv1a, read_to_string};

pub const DEFAULT_DIM: usize = 200;
pub const OOV_BOUND: f64 = 0.25;

/// How vectors are produced for words missing from the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovPolicy {
    pub seed: u64,
}

impl OovPolicy {
    /// Uniform in [-0.25, 0.25], seeded by a hash of the word.
    pub fn vector(&self, word: &str, dim: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(word.as_bytes()) ^ self.seed);
        (0..dim).map(|_| rng.gen_range(-OOV_BOUND..=OOV_BOUND)).collect()
    }
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy { seed: 0x5eed }
    }
}

#[derive(Debug)]
pub struct EmbeddingMatrix {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
    oov: OovPolicy,
    oov_cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl Clone for EmbeddingMatrix {
    fn clone(&self) -> Self {
        EmbeddingMatrix {
            words: self.words.clone(),
            index: self.index.clone(),
            dim: self.dim,
            data: self.data.clone(),
            oov: self.oov,
            oov_cache: Mutex::new(self.oov_cache.lock().expect("oov cache poisoned").clone()),
        }
    }
}

impl PartialEq for EmbeddingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && self.dim == other.dim && self.data == other.data && self.oov == other.oov
    }
}

impl EmbeddingMatrix {
    /// Builds a matrix from distinct words and row-major values.
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if data.len() != words.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: words.len() * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("embedding values must be finite".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Contract(format!("duplicate embedding word {w:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            words,
            index,
            dim,
            data,
            oov: OovPolicy::default(),
            oov_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_oov_policy(mut self, oov: OovPolicy) -> Self {
        self.oov = oov;
        self.oov_cache = Mutex::new(HashMap::new());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    /// The stored row for known words, otherwise the cached OOV vector.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        if let Some(row) = self.get(word) {
            return row.to_vec();
        }
        let mut cache = self.oov_cache.lock().expect("oov cache poisoned");
        cache
            .entry(word.to_string())
            .or_insert_with(|| self.oov.vector(word, self.dim))
            .clone()
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            s.push_str(w);
            for v in self.row(i) {
                let _ = write!(s, " {v:.6}");
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Loads word2vec text vectors, requiring `expected_dim` columns when given.
pub fn load_text_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    parse_text_embeddings(&read_to_string(path)?, &path.display().to_string(), expected_dim)
}

pub fn parse_text_embeddings(text: &str, source: &str, expected_dim: Option<usize>) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(source, 1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_header = |f: &str| f.parse::<usize>().ok();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (parse_header(c), parse_header(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(source, 1, format!("bad header {header:?}"))),
        },
        _ => return Err(Error::parse(source, 1, format!("bad header {header:?}"))),
    };
    if let Some(want) = expected_dim {
        if want != dim {
            return Err(Error::parse(
                source,
                1,
                format!("dimension {dim} does not match the configured {want}"),
            ));
        }
    }

    let mut words = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    let mut seen = HashMap::new();
    let mut rows = 0;
    for (i, line) in lines {
        let lineno = i + 1;
        rows += 1;
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-blank line has a field");
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(source, lineno, format!("non-numeric value {p:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if let Some(first) = seen.get(word) {
            log::warn!("{source}:{lineno}: duplicate word {word:?}, keeping line {first}");
            continue;
        }
        seen.insert(word.to_string(), lineno);
        words.push(word.to_string());
        data.extend(values);
    }
    if rows != count {
        return Err(Error::parse(
            source,
            1,
            format!("header declares {count} rows, found {rows}"),
        ));
    }
    EmbeddingMatrix::new(words, dim, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub subsample: f64,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: DEFAULT_DIM,
            window: 5,
            negatives: 5,
            epochs: 5,
            subsample: 1e-3,
            min_count: 2,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("min_count", self.min_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("sgns {name} must be positive")));
            }
        }
        if !(self.subsample > 0.0 && self.learning_rate > 0.0) {
            return Err(Error::Config(
                "sgns subsample and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SgnsModel {
    pub matrix: EmbeddingMatrix,
    /// Mean negative-sampling loss per (center, context) pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Trains skip-gram input vectors over tokenized sentences.
pub fn train_sgns<T: AsRef<[S]>, S: AsRef<str>>(sentences: &[T], cfg: &SgnsConfig) -> Result<SgnsModel> {
    cfg.validate()?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in s.as_ref() {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count).collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if vocab.len() < 2 {
        return Err(Error::EmptyVocabulary(format!(
            "{} word(s) reach min_count {}",
            vocab.len(),
            cfg.min_count
        )));
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(w, _))| (w, i)).collect();
    let total: usize = vocab.iter().map(|&(_, c)| c).sum();
    let corpus: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            s.as_ref()
                .iter()
                .filter_map(|t| index.get(t.as_ref()).copied())
                .collect()
        })
        .collect();

    let threshold = cfg.subsample * total as f64;
    let keep_prob: Vec<f64> = vocab
        .iter()
        .map(|&(_, c)| {
            let c = c as f64;
            ((c / threshold).sqrt() + 1.0) * threshold / c
        })
        .collect();
    let noise =
        WeightedIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(0.75))).expect("vocabulary counts are positive");

    let dim = cfg.dim;
    let n = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..n * dim).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0; n * dim];
    let mut grad = vec![0.0; dim];

    let planned = (total * cfg.epochs) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut kept = Vec::new();
    for _ in 0..cfg.epochs {
        let (mut loss, mut pairs) = (0.0, 0usize);
        for sentence in &corpus {
            kept.clear();
            kept.extend(sentence.iter().copied().filter(|&w| rng.gen::<f64>() < keep_prob[w]));
            processed += sentence.len();
            let lr = cfg.learning_rate * (1.0 - processed as f64 / (planned + 1.0)).max(1e-4);
            for (pos, &center) in kept.iter().enumerate() {
                let reach = rng.gen_range(1..=cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos];
                    let inp = center * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = target * dim;
                        let dot: f64 = (0..dim).map(|j| input[inp + j] * output[out + j]).sum();
                        let p = sigmoid(dot);
                        loss -= if label > 0.0 {
                            p.max(1e-12).ln()
                        } else {
                            (1.0 - p).max(1e-12).ln()
                        };
                        let g = lr * (label - p);
                        for j in 0..dim {
                            grad[j] += g * output[out + j];
                            output[out + j] += g * input[inp + j];
                        }
                    }
                    for j in 0..dim {
                        input[inp + j] += grad[j];
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    let words = vocab.iter().map(|&(w, _)| w.to_string()).collect();
    Ok(SgnsModel {
        matrix: EmbeddingMatrix::new(words, dim, input)?,
        epoch_losses,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
