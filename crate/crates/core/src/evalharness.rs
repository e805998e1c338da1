//! Metrics, stratified k-fold cross-validation, baseline and set-aside
//! evaluation, and the learning-curve experiment.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClinicalNote, GroundTruthSpan, SentenceLabel};
use crate::error::{Error, Result};
use crate::plan_extract::{sentence_examples, LabeledSentence, NoteExtraction};

/// Fits a model on labeled examples of type `X`.
pub trait Trainer<X>: Sync {
    fn train(&self, xs: &[&X], ys: &[bool], seed: u64) -> Result<Box<dyn Predictor<X>>>;
}

pub trait Predictor<X>: Send + Sync {
    /// `true` means plan.
    fn predict(&self, x: &X) -> Result<bool>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_labels(gold: &[bool], pred: &[bool]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: gold.len(),
                right: pred.len(),
            });
        }
        let mut c = ConfusionCounts::default();
        for (&g, &p) in gold.iter().zip(pred) {
            match (g, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts seen from the negative class.
    pub fn flipped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.precision(), self.recall())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Positive-class F1 of each fold, in fold order; empty outside cross-validation.
    pub fold_f1: Vec<f64>,
    pub fold_f1_std: Option<f64>,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let neg = counts.flipped();
        // Pooling both classes, every error is one FP and one FN.
        let pooled_tp = counts.tp + neg.tp;
        let pooled_fp = counts.fp + neg.fp;
        let pooled_fn = counts.fn_ + neg.fn_;
        let micro_f1 = f1_score(
            ratio(pooled_tp, pooled_tp + pooled_fp),
            ratio(pooled_tp, pooled_tp + pooled_fn),
        );
        MetricsReport {
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            micro_f1,
            macro_f1: (counts.f1() + neg.f1()) / 2.0,
            fold_f1: Vec::new(),
            fold_f1_std: None,
        }
    }
}

pub fn compute_metrics(gold: &[bool], pred: &[bool]) -> Result<MetricsReport> {
    if gold.is_empty() {
        return Err(Error::Contract("metrics need at least one example".into()));
    }
    Ok(MetricsReport::from_counts(ConfusionCounts::from_labels(gold, pred)?))
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = crate::util::mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Sorted example indices per fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, ix)| ix.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Seeded per-class shuffle, then one round-robin pass over positives
/// followed by negatives, so fold sizes differ by at most one.
pub fn kfold_split(labels: &[bool], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Config(format!("k = {k} exceeds the {} examples", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if !idx.is_empty() && idx.len() < k {
            log::warn!(
                "class {} has {} examples for {k} folds; some folds will lack it",
                SentenceLabel::from_bool(class),
                idx.len()
            );
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { k, seed, folds })
}

pub fn evaluate_predictor<X: Sync>(predictor: &dyn Predictor<X>, xs: &[X], ys: &[bool]) -> Result<MetricsReport> {
    let pred = xs
        .par_iter()
        .map(|x| predictor.predict(x))
        .collect::<Result<Vec<bool>>>()?;
    compute_metrics(ys, &pred)
}

/// k-fold cross-validation. Each fold trains on its own training side with
/// seed `seed ^ fold`; headline metrics pool all held-out predictions.
pub fn cross_validate<X: Sync>(
    xs: &[X],
    ys: &[bool],
    trainer: &dyn Trainer<X>,
    k: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: ys.len(),
            right: xs.len(),
        });
    }
    let plan = kfold_split(ys, k, seed)?;
    cross_validate_with_plan(xs, ys, trainer, &plan)
}

pub fn cross_validate_with_plan<X: Sync>(
    xs: &[X],
    ys: &[bool],
    trainer: &dyn Trainer<X>,
    plan: &FoldPlan,
) -> Result<MetricsReport> {
    let all: Vec<usize> = (0..xs.len()).collect();
    run_folds(xs, ys, &all, trainer, plan)
}

/// Cross-validation over `xs[subset[..]]`; `plan` indexes into `subset`.
fn run_folds<X: Sync>(
    xs: &[X],
    ys: &[bool],
    subset: &[usize],
    trainer: &dyn Trainer<X>,
    plan: &FoldPlan,
) -> Result<MetricsReport> {
    let per_fold = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let run = || -> Result<Vec<(usize, bool)>> {
                let train = plan.train_indices(fold);
                let tx: Vec<&X> = train.iter().map(|&i| &xs[subset[i]]).collect();
                let ty: Vec<bool> = train.iter().map(|&i| ys[subset[i]]).collect();
                let model = trainer.train(&tx, &ty, plan.seed ^ fold as u64)?;
                plan.test_indices(fold)
                    .iter()
                    .map(|&i| model.predict(&xs[subset[i]]).map(|p| (i, p)))
                    .collect()
            };
            run().map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gold_all: Vec<bool> = subset.iter().map(|&i| ys[i]).collect();
    let mut pred = vec![false; subset.len()];
    let mut fold_f1 = Vec::with_capacity(plan.k);
    for fold in &per_fold {
        let gold: Vec<bool> = fold.iter().map(|&(i, _)| gold_all[i]).collect();
        let got: Vec<bool> = fold.iter().map(|&(_, p)| p).collect();
        fold_f1.push(ConfusionCounts::from_labels(&gold, &got)?.f1());
        for &(i, p) in fold {
            pred[i] = p;
        }
    }
    let mut report = compute_metrics(&gold_all, &pred)?;
    report.fold_f1_std = Some(std_dev(&fold_f1));
    report.fold_f1 = fold_f1;
    Ok(report)
}

fn gold_lookup(ground_truth: &[GroundTruthSpan]) -> HashMap<(&str, usize), bool> {
    ground_truth
        .iter()
        .map(|g| ((g.note_id.as_str(), g.start), g.label.is_plan()))
        .collect()
}

/// Scores the heading heuristics themselves: a sentence is predicted plan iff
/// it lies in an extracted plan section. Header sentences are not scored.
pub fn evaluate_baseline(
    notes: &[ClinicalNote],
    ground_truth: &[GroundTruthSpan],
    extractions: &[NoteExtraction],
) -> Result<MetricsReport> {
    if notes.len() != extractions.len() {
        return Err(Error::LengthMismatch {
            left: notes.len(),
            right: extractions.len(),
        });
    }
    let gold_of = gold_lookup(ground_truth);
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for (note, ex) in notes.iter().zip(extractions) {
        if note.note_id != ex.note_id {
            return Err(Error::DanglingNote(ex.note_id.clone()));
        }
        let mask = ex.plan_mask();
        for (i, s) in ex.layout.sentences.iter().enumerate().filter(|(_, s)| !s.is_header) {
            let g = gold_of.get(&(note.note_id.as_str(), s.start)).ok_or_else(|| {
                Error::Contract(format!(
                    "sentence at byte {} of note {} has no gold label",
                    s.start, note.note_id
                ))
            })?;
            gold.push(*g);
            pred.push(mask[i]);
        }
    }
    compute_metrics(&gold, &pred)
}

/// Gold-labeled evaluation set: every plan sentence plus an equal-size
/// seeded sample of the other non-header sentences.
pub fn set_aside_dataset(
    notes: &[ClinicalNote],
    ground_truth: &[GroundTruthSpan],
    extractions: &[NoteExtraction],
    seed: u64,
) -> Result<Vec<LabeledSentence>> {
    if notes.len() != extractions.len() {
        return Err(Error::LengthMismatch {
            left: notes.len(),
            right: extractions.len(),
        });
    }
    let gold_of = gold_lookup(ground_truth);
    let (mut plans, mut others) = (Vec::new(), Vec::new());
    for (note, ex) in notes.iter().zip(extractions) {
        for (i, mut s) in sentence_examples(note, ex) {
            let start = ex.layout.sentences[i].start;
            let g = gold_of.get(&(note.note_id.as_str(), start)).ok_or_else(|| {
                Error::Contract(format!(
                    "sentence at byte {start} of note {} has no gold label",
                    note.note_id
                ))
            })?;
            s.label = SentenceLabel::from_bool(*g);
            if *g {
                plans.push(s);
            } else {
                others.push((others.len(), s));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    others.shuffle(&mut rng);
    others.truncate(plans.len());
    others.sort_by_key(|(order, _)| *order);
    plans.extend(others.into_iter().map(|(_, s)| s));
    Ok(plans)
}

/// 0.01, 0.02, ..., 1.00.
pub fn curve_fractions() -> Vec<f64> {
    (1..=100).map(|i| f64::from(i) / 100.0).collect()
}

/// Seeded stratified subsample of ⌈fraction·n⌉ indices. Each class is
/// shuffled once per seed, so smaller fractions are prefixes of larger ones.
pub fn stratified_subsample(labels: &[bool], fraction: f64, seed: u64) -> Vec<usize> {
    let n = labels.len();
    let m = ((fraction * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = [true, false]
        .iter()
        .map(|&c| {
            let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            idx.shuffle(&mut rng);
            idx
        })
        .collect();
    let n_pos = by_class[0].len();
    let take_pos = if n == 0 {
        0
    } else {
        ((m as f64 * n_pos as f64 / n as f64).round() as usize)
            .min(n_pos)
            .max(m.saturating_sub(n - n_pos))
    };
    by_class[0].truncate(take_pos);
    by_class[1].truncate(m - take_pos);
    let mut out: Vec<usize> = by_class.concat();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub n_examples: usize,
    pub cv_f1: Option<f64>,
    pub setaside_f1: Option<f64>,
    pub valid: bool,
}

/// One point per fraction: cross-validation on the stratified slice, and,
/// when an evaluation set is given, a model trained on the whole slice
/// scored against it. Slices with fewer than two examples of either class,
/// or fewer than `k` examples, are recorded as invalid: a class seen once
/// would be missing from the training side of the fold that holds it.
pub fn learning_curve<X: Sync>(
    xs: &[X],
    ys: &[bool],
    eval: Option<(&[X], &[bool])>,
    trainer: &dyn Trainer<X>,
    k: usize,
    seed: u64,
    fractions: &[f64],
) -> Result<Vec<CurvePoint>> {
    fractions
        .par_iter()
        .map(|&fraction| {
            let idx = stratified_subsample(ys, fraction, seed);
            let sx: Vec<&X> = idx.iter().map(|&i| &xs[i]).collect();
            let sy: Vec<bool> = idx.iter().map(|&i| ys[i]).collect();
            let pos = sy.iter().filter(|&&y| y).count();
            if pos < 2 || sy.len() - pos < 2 || sy.len() < k {
                log::warn!("curve point {fraction:.2}: degenerate slice of {} examples", sy.len());
                return Ok(CurvePoint {
                    fraction,
                    n_examples: sy.len(),
                    cv_f1: None,
                    setaside_f1: None,
                    valid: false,
                });
            }
            let cv = run_folds(xs, ys, &idx, trainer, &kfold_split(&sy, k, seed)?)?;
            let setaside_f1 = match eval {
                Some((ex, ey)) => {
                    let model = trainer.train(&sx, &sy, seed)?;
                    Some(evaluate_predictor(model.as_ref(), ex, ey)?.f1)
                }
                None => None,
            };
            Ok(CurvePoint {
                fraction,
                n_examples: sy.len(),
                cv_f1: Some(cv.f1),
                setaside_f1,
                valid: true,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.4}"))
}

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("fraction,cv_f1,setaside_f1,valid\n");
    for p in points {
        let _ = writeln!(
            s,
            "{:.2},{},{},{}",
            p.fraction,
            fmt_opt(p.cv_f1),
            fmt_opt(p.setaside_f1),
            p.valid
        );
    }
    s
}

/// Simple line plot of both F1 series against the training fraction.
pub fn curve_to_svg(points: &[CurvePoint]) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let x = |f: f64| pad + f * (w - 2.0 * pad);
    let y = |v: f64| h - pad - v * (h - 2.0 * pad);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - pad,
        r = w - pad
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.0}%</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{tick:.2}</text>",
            x(tick),
            h - pad + 16.0,
            tick * 100.0,
            pad - 6.0,
            y(tick) + 4.0
        );
    }
    let series: [(&str, &str, fn(&CurvePoint) -> Option<f64>); 2] = [
        ("cross-validation", "#1f77b4", |p| p.cv_f1),
        ("set-aside", "#d62728", |p| p.setaside_f1),
    ];
    for (i, (name, color, get)) in series.iter().enumerate() {
        let pts: Vec<String> = points
            .iter()
            .filter_map(|p| get(p).map(|v| format!("{:.1},{:.1}", x(p.fraction), y(v))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            pts.join(" "),
            w - pad - 120.0,
            pad + 16.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn metrics_to_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut s = String::from("method,precision,recall,f1,micro_f1,macro_f1,fold_f1_std\n");
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "{name},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            r.precision,
            r.recall,
            r.f1,
            r.micro_f1,
            r.macro_f1,
            fmt_opt(r.fold_f1_std)
        );
    }
    s
}

pub fn metrics_to_markdown(rows: &[(String, MetricsReport)]) -> String {
    let mut s = String::from(
        "| Method | Precision | Recall | F1 | Micro-F1 | Macro-F1 | F1 std |\n|---|---|---|---|---|---|---|\n",
    );
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "| {name} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {} |",
            r.precision,
            r.recall,
            r.f1,
            r.micro_f1,
            r.macro_f1,
            r.fold_f1_std.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
        );
    }
    s
}
