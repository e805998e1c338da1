//! The five trainable model variants behind one interface, plus the
//! sentence preprocessing they share.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{self, CnnConfig, CnnExample, CnnModel, CnnModelFile, EmbeddingMode, TrainingLog};
use crate::embeddings::{train_sgns, EmbeddingMatrix, SgnsConfig};
use crate::error::{Error, Result};
use crate::evalharness::{Predictor, Trainer};
use crate::features::{
    select_features, vectorize, FeatureExtractor, FeatureFamilies, FeatureVector, SelectionConfig, SentenceContext,
    Vocabulary,
};
use crate::linear_svm::{self, LinearModel, SvmModelFile, SvmTrainConfig};
use crate::plan_extract::LabeledSentence;
use crate::sectioning::SectionLabel;
use crate::textproc::{TextAnalysis, TextProcessor};
use crate::util::read_to_string;

pub const CLASSIFIER_FORMAT: &str = "plan-miner-classifier";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvmBow,
    SvmAll,
    CnnRandom,
    CnnPretrained,
    CnnPretrainedGlobal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::SvmBow,
        ModelKind::SvmAll,
        ModelKind::CnnRandom,
        ModelKind::CnnPretrained,
        ModelKind::CnnPretrainedGlobal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SvmBow => "svm_bow",
            ModelKind::SvmAll => "svm_all",
            ModelKind::CnnRandom => "cnn_random",
            ModelKind::CnnPretrained => "cnn_pretrained",
            ModelKind::CnnPretrainedGlobal => "cnn_pretrained_global",
        }
    }

    pub fn is_cnn(self) -> bool {
        !matches!(self, ModelKind::SvmBow | ModelKind::SvmAll)
    }

    pub fn needs_vectors(self) -> bool {
        matches!(self, ModelKind::CnnPretrained | ModelKind::CnnPretrainedGlobal)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

/// Lowercased word tokens without punctuation, as fed to the CNN and SGNS.
pub fn cnn_tokens(tp: &TextProcessor, text: &str) -> Vec<String> {
    tp.tokenize_lemmatize(text)
        .into_iter()
        .filter(|t| !t.is_punct())
        .map(|t| t.surface.to_lowercase())
        .collect()
}

/// A sentence with its linguistic analysis and context, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedSentence {
    pub text: String,
    pub analysis: TextAnalysis,
    pub words: Vec<String>,
    pub section_label: SectionLabel,
    pub note_type: String,
    pub note_category: String,
    pub provider_type: String,
}

impl AnalyzedSentence {
    pub fn new(s: &LabeledSentence, tp: &TextProcessor) -> Self {
        AnalyzedSentence {
            text: s.text.clone(),
            analysis: tp.analyze(&s.text),
            words: cnn_tokens(tp, &s.text),
            section_label: s.section_label,
            note_type: s.note_type.clone(),
            note_category: s.note_category.clone(),
            provider_type: s.provider_type.clone(),
        }
    }

    pub fn context(&self) -> SentenceContext<'_> {
        SentenceContext {
            analysis: &self.analysis,
            section_label: self.section_label,
            note_type: &self.note_type,
            note_category: &self.note_category,
            provider_type: &self.provider_type,
        }
    }

    /// Section label, note type, note category, provider type.
    pub fn globals(&self) -> Vec<String> {
        vec![
            self.section_label.to_string(),
            self.note_type.clone(),
            self.note_category.clone(),
            self.provider_type.clone(),
        ]
    }
}

pub fn analyze_all(examples: &[LabeledSentence], tp: &TextProcessor) -> (Vec<AnalyzedSentence>, Vec<bool>) {
    let xs = examples.par_iter().map(|s| AnalyzedSentence::new(s, tp)).collect();
    let ys = examples.iter().map(LabeledSentence::is_plan).collect();
    (xs, ys)
}

/// Where pre-trained CNN vectors come from.
#[derive(Debug, Clone)]
pub enum VectorSource {
    /// Vectors supplied from outside the training data, used as given.
    Fixed(Arc<EmbeddingMatrix>),
    /// Skip-gram vectors fit on the training sentences of each fit.
    FitOnTraining(SgnsConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub svm: SvmTrainConfig,
    pub selection: SelectionConfig,
    pub cnn: CnnConfig,
    pub sgns: SgnsConfig,
}

impl ClassifierConfig {
    /// The CNN configuration a kind trains with.
    pub fn cnn_for(&self, kind: ModelKind) -> CnnConfig {
        let mut cfg = self.cnn.clone();
        match kind {
            ModelKind::CnnRandom => {
                cfg.embedding_mode = EmbeddingMode::Random;
                cfg.global_feature_dims.clear();
            }
            ModelKind::CnnPretrained => {
                if cfg.embedding_mode == EmbeddingMode::Random {
                    cfg.embedding_mode = EmbeddingMode::PretrainedTuned;
                }
                cfg.global_feature_dims.clear();
            }
            ModelKind::CnnPretrainedGlobal => {
                if cfg.embedding_mode == EmbeddingMode::Random {
                    cfg.embedding_mode = EmbeddingMode::PretrainedTuned;
                }
                if cfg.global_feature_dims.is_empty() {
                    cfg.global_feature_dims = vec![8; 4];
                }
            }
            ModelKind::SvmBow | ModelKind::SvmAll => {}
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SvmClassifier {
    pub kind: ModelKind,
    pub extractor: FeatureExtractor,
    /// Selected features only; anything else is dropped at prediction time.
    pub vocabulary: Vocabulary,
    pub model: LinearModel,
}

impl SvmClassifier {
    pub fn features(&self, x: &AnalyzedSentence) -> FeatureVector {
        vectorize(&self.extractor.names(&x.context()), &self.vocabulary)
    }

    pub fn margin(&self, x: &AnalyzedSentence) -> Result<f64> {
        self.model.margin(&self.features(x))
    }
}

#[derive(Debug, Clone)]
pub struct CnnClassifier {
    pub kind: ModelKind,
    pub model: CnnModel,
}

impl CnnClassifier {
    pub fn probability(&self, x: &AnalyzedSentence) -> Result<f64> {
        let input = self.model.encode(&x.words, &x.globals());
        Ok(self.model.predict(&input)?.1)
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Svm(SvmClassifier),
    Cnn(CnnClassifier),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Svm(m) => m.kind,
            TrainedModel::Cnn(m) => m.kind,
        }
    }

    pub fn to_file(&self) -> ClassifierFile {
        let body = match self {
            TrainedModel::Svm(m) => ClassifierBody::Svm {
                families: m.extractor.families(),
                vocabulary: m.vocabulary.names().to_vec(),
                model: m.model.to_file(),
            },
            TrainedModel::Cnn(m) => ClassifierBody::Cnn {
                model: Box::new(m.model.to_file()),
            },
        };
        ClassifierFile {
            format: CLASSIFIER_FORMAT.to_string(),
            version: 1,
            kind: self.kind(),
            body,
        }
    }

    pub fn from_file(file: ClassifierFile) -> Result<Self> {
        if file.format != CLASSIFIER_FORMAT || file.version != 1 {
            return Err(Error::Config(format!(
                "unsupported classifier {:?} version {}",
                file.format, file.version
            )));
        }
        Ok(match file.body {
            ClassifierBody::Svm {
                families,
                vocabulary,
                model,
            } => TrainedModel::Svm(SvmClassifier {
                kind: file.kind,
                extractor: FeatureExtractor::new(families),
                vocabulary: Vocabulary::from_names(vocabulary),
                model: LinearModel::from_file(model)?,
            }),
            ClassifierBody::Cnn { model } => TrainedModel::Cnn(CnnClassifier {
                kind: file.kind,
                model: CnnModel::from_file(*model)?,
            }),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        TrainedModel::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TrainedModel::from_json(&read_to_string(path.as_ref())?)
    }
}

impl Predictor<AnalyzedSentence> for TrainedModel {
    fn predict(&self, x: &AnalyzedSentence) -> Result<bool> {
        match self {
            // Ties go to nonplan.
            TrainedModel::Svm(m) => Ok(m.margin(x)? > 0.0),
            TrainedModel::Cnn(m) => Ok(m.probability(x)? > 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFile {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub body: ClassifierBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierBody {
    Svm {
        families: FeatureFamilies,
        vocabulary: Vec<String>,
        model: SvmModelFile,
    },
    Cnn {
        model: Box<CnnModelFile>,
    },
}

/// Trains one model kind. Every statistic (feature vocabulary, selection,
/// CNN vocabulary, fitted vectors) comes from the examples passed to `fit`.
#[derive(Debug, Clone)]
pub struct KindTrainer {
    pub kind: ModelKind,
    pub config: ClassifierConfig,
    pub vectors: Option<VectorSource>,
}

impl KindTrainer {
    pub fn new(kind: ModelKind, config: ClassifierConfig) -> Self {
        let vectors = kind
            .needs_vectors()
            .then(|| VectorSource::FitOnTraining(config.sgns.clone()));
        KindTrainer { kind, config, vectors }
    }

    pub fn with_vectors(mut self, vectors: VectorSource) -> Self {
        self.vectors = Some(vectors);
        self
    }

    pub fn fit(&self, xs: &[&AnalyzedSentence], ys: &[bool], seed: u64) -> Result<TrainedModel> {
        self.fit_logged(xs, ys, seed).map(|(m, _)| m)
    }

    /// Like [`KindTrainer::fit`], also returning the CNN training log when there is one.
    pub fn fit_logged(
        &self,
        xs: &[&AnalyzedSentence],
        ys: &[bool],
        seed: u64,
    ) -> Result<(TrainedModel, Option<TrainingLog>)> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: ys.len(),
                right: xs.len(),
            });
        }
        if !ys.contains(&true) || !ys.contains(&false) {
            return Err(Error::SingleClass);
        }
        match self.kind {
            ModelKind::SvmBow | ModelKind::SvmAll => Ok((TrainedModel::Svm(self.fit_svm(xs, ys, seed)?), None)),
            _ => {
                let (m, log) = self.fit_cnn(xs, ys, seed)?;
                Ok((TrainedModel::Cnn(m), Some(log)))
            }
        }
    }

    fn fit_svm(&self, xs: &[&AnalyzedSentence], ys: &[bool], seed: u64) -> Result<SvmClassifier> {
        let families = if self.kind == ModelKind::SvmBow {
            FeatureFamilies::bow_only()
        } else {
            FeatureFamilies::all()
        };
        let extractor = FeatureExtractor::new(families);
        let names: Vec<Vec<String>> = xs.par_iter().map(|x| extractor.names(&x.context())).collect();
        let mut full = Vocabulary::new();
        let rows: Vec<Vec<usize>> = names
            .iter()
            .map(|ns| ns.iter().filter_map(|n| full.intern(n)).collect())
            .collect();
        let selection = select_features(&rows, ys, &full, &self.config.selection)?;
        let vocabulary = selection.vocabulary;
        if vocabulary.is_empty() {
            log::warn!("feature selection kept no features; the model predicts from its bias alone");
        }
        let vectors: Vec<FeatureVector> = names.iter().map(|ns| vectorize(ns, &vocabulary)).collect();
        let labels: Vec<i8> = ys.iter().map(|&y| if y { 1 } else { -1 }).collect();
        let cfg = SvmTrainConfig {
            seed,
            ..self.config.svm
        };
        let model = linear_svm::train(&vectors, &labels, &cfg)?;
        Ok(SvmClassifier {
            kind: self.kind,
            extractor,
            vocabulary,
            model,
        })
    }

    fn fit_cnn(&self, xs: &[&AnalyzedSentence], ys: &[bool], seed: u64) -> Result<(CnnClassifier, TrainingLog)> {
        let cfg = CnnConfig {
            seed,
            ..self.config.cnn_for(self.kind)
        };
        let use_globals = !cfg.global_feature_dims.is_empty();
        let examples: Vec<CnnExample> = xs
            .iter()
            .zip(ys)
            .map(|(x, &label)| CnnExample {
                tokens: x.words.clone(),
                globals: if use_globals { x.globals() } else { Vec::new() },
                label,
            })
            .collect();
        let fitted;
        let vectors = match (&self.vectors, cfg.embedding_mode.is_pretrained()) {
            (_, false) => None,
            (Some(VectorSource::Fixed(m)), true) => Some(m.as_ref()),
            (Some(VectorSource::FitOnTraining(sgns)), true) => {
                let sentences: Vec<&[String]> = xs.iter().map(|x| x.words.as_slice()).collect();
                let sgns = SgnsConfig {
                    dim: cfg.embedding_dim,
                    seed,
                    ..sgns.clone()
                };
                fitted = train_sgns(&sentences, &sgns)?.matrix;
                Some(&fitted)
            }
            (None, true) => return Err(Error::Config(format!("{} needs word vectors", self.kind))),
        };
        let (model, log) = cnn::train(&examples, &cfg, vectors)?;
        Ok((CnnClassifier { kind: self.kind, model }, log))
    }
}

impl Trainer<AnalyzedSentence> for KindTrainer {
    fn train(&self, xs: &[&AnalyzedSentence], ys: &[bool], seed: u64) -> Result<Box<dyn Predictor<AnalyzedSentence>>> {
        Ok(Box::new(self.fit(xs, ys, seed)?))
    }
}
