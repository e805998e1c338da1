use std::path::{Path, PathBuf};
use std::sync::Arc;

use planminer::classifier::{analyze_all, AnalyzedSentence, KindTrainer, ModelKind, TrainedModel, VectorSource};
use planminer::corpus::{
    corpus_to_string, generate_synthetic, ground_truth_to_string, parse_corpus, parse_ground_truth, ClinicalNote,
    GroundTruthSpan,
};
use planminer::embeddings::parse_text_embeddings;
use planminer::evalharness::{
    cross_validate, curve_fractions, curve_to_csv, curve_to_svg, evaluate_baseline, evaluate_predictor, learning_curve,
    metrics_to_csv, metrics_to_markdown, set_aside_dataset, MetricsReport,
};
use planminer::plan_extract::{
    build_noisy_dataset, corpus_stats, dataset_to_string, parse_dataset, Extractor, HeadingLexicon, LabeledSentence,
};
use planminer::sectioning::HeaderRules;
use planminer::textproc::TextProcessor;

use crate::config::RunConfig;
use crate::error::{CliError, StageExt};
use crate::output::Outputs;

fn read_input(stage: &'static str, path: &Path, out: &mut Outputs) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Input {
        stage,
        source: planminer::Error::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    out.input(path, &bytes);
    String::from_utf8(bytes).map_err(|e| CliError::Input {
        stage,
        source: planminer::Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("not UTF-8: {e}"),
        },
    })
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

fn load_corpus(path: &Path, out: &mut Outputs) -> Result<Vec<ClinicalNote>, CliError> {
    let text = read_input("load-corpus", path, out)?;
    parse_corpus(&text, &source(path)).input("load-corpus")
}

fn load_ground_truth(path: &Path, out: &mut Outputs) -> Result<Vec<GroundTruthSpan>, CliError> {
    let text = read_input("load-ground-truth", path, out)?;
    parse_ground_truth(&text, &source(path)).input("load-ground-truth")
}

fn load_dataset(path: &Path, out: &mut Outputs) -> Result<Vec<LabeledSentence>, CliError> {
    let text = read_input("load-dataset", path, out)?;
    parse_dataset(&text, &source(path)).input("load-dataset")
}

fn extractor(cfg: &RunConfig, out: &mut Outputs) -> Result<Extractor, CliError> {
    let lexicon = match &cfg.lexicon {
        Some(path) => {
            let text = read_input("load-lexicon", path, out)?;
            HeadingLexicon::parse(&text, &source(path)).input("load-lexicon")?
        }
        None => HeadingLexicon::default(),
    };
    Ok(Extractor::new(HeaderRules::default(), lexicon))
}

fn trainer(kind: ModelKind, cfg: &RunConfig, out: &mut Outputs) -> Result<KindTrainer, CliError> {
    let trainer = KindTrainer::new(kind, cfg.classifier.clone());
    match (&cfg.embeddings, kind.needs_vectors()) {
        (Some(path), true) => {
            let text = read_input("load-embeddings", path, out)?;
            let dim = cfg.classifier.cnn.embedding_dim;
            let m = parse_text_embeddings(&text, &source(path), Some(dim)).input("load-embeddings")?;
            Ok(trainer.with_vectors(VectorSource::Fixed(Arc::new(m))))
        }
        _ => Ok(trainer),
    }
}

fn analyzed(examples: &[LabeledSentence]) -> (Vec<AnalyzedSentence>, Vec<bool>) {
    analyze_all(examples, &TextProcessor::default())
}

/// Gold plan sentences plus an equal number of other sentences from an annotated corpus.
fn annotated_set(
    notes: &[ClinicalNote],
    gt: &[GroundTruthSpan],
    ex: &Extractor,
    seed: u64,
) -> Result<(Vec<AnalyzedSentence>, Vec<bool>), CliError> {
    let extractions = ex.extract_corpus(notes);
    let set = set_aside_dataset(notes, gt, &extractions, seed).input("set-aside")?;
    Ok(analyzed(&set))
}

pub struct GenCorpus {
    pub out: PathBuf,
}

pub fn gen_corpus(args: GenCorpus, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let corpus = generate_synthetic(&cfg.synth).pipeline("generate")?;
    let mut out = Outputs::new(&args.out);
    out.add("corpus.jsonl", corpus_to_string(&corpus.notes));
    out.add("ground_truth.jsonl", ground_truth_to_string(&corpus.ground_truth));
    log::info!("generated {} notes", corpus.notes.len());
    Ok(out)
}

pub struct Extract {
    pub corpus: PathBuf,
    pub out: PathBuf,
}

pub fn extract(args: Extract, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(&args.out);
    let notes = load_corpus(&args.corpus, &mut out)?;
    let ex = extractor(cfg, &mut out)?;
    let extractions = ex.extract_corpus(&notes);
    let ds = build_noisy_dataset(&notes, &extractions, &ex.config_hash(), cfg.seed()).pipeline("build-dataset")?;
    let stats = corpus_stats(&notes, &extractions).pipeline("corpus-stats")?;
    log::info!("{} positives, {} negatives", ds.n_positive(), ds.n_negative());
    out.add("dataset.jsonl", dataset_to_string(&ds.examples));
    out.add("provenance.json", json(&ds.provenance));
    out.add("stats.json", json(&stats));
    Ok(out)
}

pub struct Train {
    pub dataset: PathBuf,
    pub out: PathBuf,
}

pub fn train(args: Train, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(&args.out);
    let examples = load_dataset(&args.dataset, &mut out)?;
    let trainer = trainer(cfg.model, cfg, &mut out)?;
    let (xs, ys) = analyzed(&examples);
    let refs: Vec<&AnalyzedSentence> = xs.iter().collect();
    let (model, log) = trainer.fit_logged(&refs, &ys, cfg.seed()).pipeline("train")?;
    out.add("model.json", model.to_json().pipeline("serialize-model")?);
    if let Some(log) = log {
        out.add("training_log.csv", log.to_csv());
    }
    Ok(out)
}

pub struct Evaluate {
    pub model: PathBuf,
    pub corpus: PathBuf,
    pub ground_truth: PathBuf,
    pub out: PathBuf,
}

pub fn evaluate(args: Evaluate, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(&args.out);
    let text = read_input("load-model", &args.model, &mut out)?;
    let model = TrainedModel::from_json(&text).input("load-model")?;
    let notes = load_corpus(&args.corpus, &mut out)?;
    let gt = load_ground_truth(&args.ground_truth, &mut out)?;
    let ex = extractor(cfg, &mut out)?;
    let baseline = evaluate_baseline(&notes, &gt, &ex.extract_corpus(&notes)).input("baseline")?;
    let (xs, ys) = annotated_set(&notes, &gt, &ex, cfg.seed())?;
    let report = evaluate_predictor(&model, &xs, &ys).pipeline("evaluate")?;
    let rows = vec![
        ("heading_baseline".to_string(), baseline),
        (model.kind().to_string(), report),
    ];
    out.add("metrics.csv", metrics_to_csv(&rows));
    out.add("metrics.md", metrics_to_markdown(&rows));
    Ok(out)
}

pub struct Xval {
    pub dataset: PathBuf,
    pub models: Vec<ModelKind>,
    pub out: PathBuf,
}

pub fn xval(args: Xval, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(&args.out);
    let examples = load_dataset(&args.dataset, &mut out)?;
    let kinds = if args.models.is_empty() {
        vec![cfg.model]
    } else {
        args.models
    };
    let trainers = kinds
        .iter()
        .map(|&k| trainer(k, cfg, &mut out))
        .collect::<Result<Vec<_>, _>>()?;
    let (xs, ys) = analyzed(&examples);
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for (kind, trainer) in kinds.iter().zip(&trainers) {
        let report = cross_validate(&xs, &ys, trainer, cfg.k, cfg.seed()).pipeline("cross-validate")?;
        log::info!("{kind}: micro-F1 {:.3}", report.micro_f1);
        rows.push((kind.to_string(), report));
    }
    out.add("xval.csv", metrics_to_csv(&rows));
    out.add("xval.md", metrics_to_markdown(&rows));
    Ok(out)
}

pub struct Curve {
    pub dataset: PathBuf,
    pub corpus: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn curve(args: Curve, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(&args.out);
    let examples = load_dataset(&args.dataset, &mut out)?;
    let held = match (&args.corpus, &args.ground_truth) {
        (Some(c), Some(g)) => {
            let notes = load_corpus(c, &mut out)?;
            let gt = load_ground_truth(g, &mut out)?;
            let ex = extractor(cfg, &mut out)?;
            Some(annotated_set(&notes, &gt, &ex, cfg.seed())?)
        }
        (None, None) => None,
        _ => return Err(CliError::Usage("--corpus and --ground-truth go together".into())),
    };
    let trainer = trainer(cfg.model, cfg, &mut out)?;
    let (xs, ys) = analyzed(&examples);
    let eval = held.as_ref().map(|(x, y)| (x.as_slice(), y.as_slice()));
    let points =
        learning_curve(&xs, &ys, eval, &trainer, cfg.k, cfg.seed(), &curve_fractions()).pipeline("learning-curve")?;
    out.add("curve.csv", curve_to_csv(&points));
    out.add("curve.svg", curve_to_svg(&points));
    Ok(out)
}

pub struct Report {
    pub corpus: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn report(args: Report, cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(&args.out);
    let notes = load_corpus(&args.corpus, &mut out)?;
    let gt = args
        .ground_truth
        .as_deref()
        .map(|p| load_ground_truth(p, &mut out))
        .transpose()?;
    let ex = extractor(cfg, &mut out)?;
    let extractions = ex.extract_corpus(&notes);
    let stats = corpus_stats(&notes, &extractions).pipeline("corpus-stats")?;
    let r = &stats.ratios;
    let mut md = String::from("| statistic | count | ratio |\n|---|---:|---:|\n");
    md.push_str(&format!("| notes | {} | |\n", stats.notes_total));
    md.push_str(&format!(
        "| notes with secAP | {} | {:.3} |\n",
        stats.notes_with_secap, r.secap_notes_of_total
    ));
    md.push_str(&format!(
        "| notes with plan headings | {} | {:.3} |\n",
        stats.notes_with_plan_headings, r.plan_headed_notes_of_secap
    ));
    md.push_str(&format!(
        "| secAP sections with plan headings | {} | {:.3} |\n",
        stats.secap_with_plan_headings, r.plan_headed_secap_of_secap
    ));
    md.push_str(&format!(
        "| plan sentences | {} | {:.3} |\n",
        stats.plan_sentences, r.plan_sentences_of_headed_secap
    ));
    if let Some(gt) = gt {
        let baseline = evaluate_baseline(&notes, &gt, &extractions).input("baseline")?;
        let rows = vec![("heading_baseline".to_string(), baseline)];
        md.push('\n');
        md.push_str(&metrics_to_markdown(&rows));
        out.add("baseline.csv", metrics_to_csv(&rows));
    }
    out.add("stats.json", json(&stats));
    out.add("report.md", md);
    Ok(out)
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}
