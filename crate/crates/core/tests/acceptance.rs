//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! line per criterion; the process fails if any criterion fails.

mod common;

use std::cell::OnceCell;
use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use planminer::classifier::{analyze_all, AnalyzedSentence, ClassifierConfig, KindTrainer, ModelKind, TrainedModel};
use planminer::cnn::CnnConfig;
use planminer::corpus::{generate_synthetic, ClinicalNote, SynthConfig};
use planminer::evalharness::{
    compute_metrics, cross_validate_with_plan, curve_fractions, evaluate_baseline, evaluate_predictor, f1_score,
    kfold_split, learning_curve, metrics_to_csv, metrics_to_markdown, set_aside_dataset, MetricsReport,
};
use planminer::features::{fisher_exact_p, pmi};
use planminer::linear_svm::{objective, predict, train, SvmTrainConfig};
use planminer::plan_extract::{corpus_stats, sentence_examples, Extractor, StopReason};
use planminer::textproc::TextProcessor;
use statrs::distribution::{Binomial, DiscreteCDF};

const HTN_NOTE: &str = include_str!("fixtures/hypertension_note.txt");

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Labels with exactly the given confusion counts.
fn labels_from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> (Vec<bool>, Vec<bool>) {
    let mut gold = Vec::with_capacity(tp + fp + fn_ + tn);
    let mut pred = Vec::with_capacity(gold.capacity());
    for (g, p, n) in [
        (true, true, tp),
        (false, true, fp),
        (true, false, fn_),
        (false, false, tn),
    ] {
        gold.extend(std::iter::repeat_n(g, n));
        pred.extend(std::iter::repeat_n(p, n));
    }
    (gold, pred)
}

fn metric_arithmetic() -> Outcome {
    // Counts chosen so that precision and recall equal the target pairs exactly.
    let cases = [
        (216_785, 10_215, 738_215, 0.955, 0.227, 0.367),
        (753_936, 150_064, 80_064, 0.834, 0.904, 0.867),
    ];
    let mut out = Vec::new();
    for (tp, fp, fn_, p, r, want) in cases {
        let (gold, pred) = labels_from_counts(tp, fp, fn_, 0);
        let m = compute_metrics(&gold, &pred).map_err(|e| e.to_string())?;
        ensure((m.precision - p).abs() < 1e-12 && (m.recall - r).abs() < 1e-12, || {
            format!("counts give P {} R {}, expected {p} {r}", m.precision, m.recall)
        })?;
        ensure((m.f1 - want).abs() <= 0.001, || {
            format!("({p}, {r}) -> F1 {:.4}, expected {want}", m.f1)
        })?;
        ensure((f1_score(p, r) - want).abs() <= 0.001, || {
            format!("f1_score({p}, {r}) = {}", f1_score(p, r))
        })?;
        out.push(format!("({p},{r})->{:.4}", m.f1));
    }
    Ok(out.join(" "))
}

fn extractor_golden() -> Outcome {
    let note = ClinicalNote::new("htn", HTN_NOTE);
    let ex = Extractor::default().extract_note(&note);
    ensure(ex.plan_sections.len() == 2, || {
        format!("{} plan sections", ex.plan_sections.len())
    })?;
    let reasons: Vec<StopReason> = ex.plan_sections.iter().map(|p| p.stop_reason).collect();
    ensure(
        reasons == [StopReason::NewDiseaseHeading, StopReason::EndOfNote],
        || format!("stop reasons {reasons:?}"),
    )?;
    let rows = sentence_examples(&note, &ex);
    let positives: Vec<&str> = rows
        .iter()
        .filter(|(_, s)| s.is_plan())
        .map(|(_, s)| s.text.as_str())
        .collect();
    let want = [
        "Check home BPs daily; report repeated BPs over 140/90",
        "Reinforced importance of taking meds consistently",
        "May increase meds if home BPs consistently elevated when he is taking his meds regularly",
        "RTC 3 mo",
        "Lipid panel",
    ];
    ensure(positives == want, || format!("positives {positives:?}"))?;
    Ok("2 sections, 5 positives, stops new_disease_heading/end_of_note".into())
}

struct Synthetic {
    xs: Vec<AnalyzedSentence>,
    ys: Vec<bool>,
    set_aside: (Vec<AnalyzedSentence>, Vec<bool>),
}

fn synthetic() -> Result<Synthetic, String> {
    let err = |e: planminer::Error| e.to_string();
    let corpus = generate_synthetic(&SynthConfig::default()).map_err(err)?;
    let ex = Extractor::default();
    let tp = TextProcessor::default();
    let ds = ex.build_dataset(&corpus.notes, 42).map_err(err)?;
    let (xs, ys) = analyze_all(&ds.examples, &tp);
    let held = generate_synthetic(&SynthConfig {
        seed: 43,
        n_patients: 30,
        ..SynthConfig::default()
    })
    .map_err(err)?;
    let held_ds =
        set_aside_dataset(&held.notes, &held.ground_truth, &ex.extract_corpus(&held.notes), 43).map_err(err)?;
    Ok(Synthetic {
        xs,
        ys,
        set_aside: analyze_all(&held_ds, &tp),
    })
}

fn baseline_pattern() -> Outcome {
    let corpus = generate_synthetic(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let ex = Extractor::default().extract_corpus(&corpus.notes);
    let m = evaluate_baseline(&corpus.notes, &corpus.ground_truth, &ex).map_err(|e| e.to_string())?;
    ensure(corpus.notes.len() == 1000, || format!("{} notes", corpus.notes.len()))?;
    ensure(m.precision >= 0.95 && m.recall <= 0.5, || {
        format!("precision {:.3} recall {:.3}", m.precision, m.recall)
    })?;
    Ok(format!("precision {:.3} recall {:.3}", m.precision, m.recall))
}

fn model_recovery(data: &Synthetic) -> Outcome {
    let refs: Vec<&AnalyzedSentence> = data.xs.iter().collect();
    let (sx, sy) = &data.set_aside;
    let mut out = Vec::new();
    for kind in [ModelKind::SvmAll, ModelKind::CnnPretrainedGlobal] {
        let model = KindTrainer::new(kind, ClassifierConfig::default())
            .fit(&refs, &data.ys, 42)
            .map_err(|e| e.to_string())?;
        let m = evaluate_predictor(&model, sx, sy).map_err(|e| e.to_string())?;
        ensure(m.f1 >= 0.85, || format!("{kind} set-aside F1 {:.3}", m.f1))?;
        out.push(format!("{kind} F1 {:.3}", m.f1));
    }
    Ok(format!("{} on {} set-aside sentences", out.join(", "), sy.len()))
}

fn gradient_oracle() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let configs = 25;
    for seed in 0..configs {
        let r = common::check_gradients(seed);
        if let Some(msg) = r.failure {
            return Err(msg);
        }
        checked += r.checked;
        worst = worst.max(r.worst);
    }
    Ok(format!(
        "{configs} configs, {checked} coordinates, worst rel error {worst:.2e}"
    ))
}

fn svm_oracle() -> Outcome {
    let cfg = SvmTrainConfig {
        epochs: 20_000,
        ..SvmTrainConfig::default()
    };
    let instances = common::svm_instances();
    let mut worst: f64 = 0.0;
    for (k, (pts, ys)) in instances.iter().enumerate() {
        let xs = common::to_vectors(pts);
        let model = train(&xs, ys, &cfg).map_err(|e| e.to_string())?;
        let got = objective(&model, &xs, ys, cfg.c).map_err(|e| e.to_string())?;
        let want = common::grid_oracle(pts, ys, cfg.c);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-3, || {
            format!("instance {k}: objective {got} vs oracle {want}")
        })?;
    }
    let (pts, ys) = common::separable_instance();
    let xs = common::to_vectors(&pts);
    let model = train(&xs, &ys, &SvmTrainConfig::default()).map_err(|e| e.to_string())?;
    for (x, &y) in xs.iter().zip(&ys) {
        let got = predict(&model, x).map_err(|e| e.to_string())?.0;
        ensure(got == y, || "separable instance misclassified".into())?;
    }
    Ok(format!(
        "{} instances, worst gap {worst:.1e}, separable accuracy 1.0",
        instances.len()
    ))
}

fn fisher_pmi_oracle() -> Outcome {
    let mut tables = 0;
    let mut worst: f64 = 0.0;
    for r1 in 0..=12u64 {
        for r2 in 0..=12u64 {
            for c1 in 0..=(r1 + r2).min(12) {
                if r1 + r2 == 0 || r1 + r2 - c1 > 12 {
                    continue;
                }
                for a in c1.saturating_sub(r2)..=r1.min(c1) {
                    let (b, c) = (r1 - a, c1 - a);
                    let d = r2 - c;
                    let got = fisher_exact_p(a, b, c, d).map_err(|e| e.to_string())?;
                    let want = common::fisher_enumerated(a, b, c, d);
                    worst = worst.max((got - want).abs());
                    ensure((got - want).abs() <= 1e-10, || {
                        format!("[[{a},{b}],[{c},{d}]]: {got} vs {want}")
                    })?;
                    tables += 1;
                }
            }
        }
    }
    let mut independent = 0;
    for n in 1..=40u64 {
        for n1 in 1..=n {
            for n_1 in 1..=n {
                if (n1 * n_1) % n == 0 {
                    let v = pmi(n1 * n_1 / n, n1, n_1, n).map_err(|e| e.to_string())?;
                    ensure(v == 0.0, || format!("pmi({}, {n1}, {n_1}, {n}) = {v}", n1 * n_1 / n))?;
                    independent += 1;
                }
            }
        }
    }
    Ok(format!(
        "{tables} tables, worst {worst:.1e}; {independent} independent tables give pmi 0"
    ))
}

fn tiny_cnn(kind: ModelKind) -> ClassifierConfig {
    let mut cfg = ClassifierConfig::default();
    cfg.cnn = CnnConfig {
        embedding_dim: 8,
        filters_per_width: 4,
        global_feature_dims: vec![2; 4],
        max_epochs: 2,
        ..cfg.cnn_for(kind)
    };
    cfg
}

fn cv_laws() -> Outcome {
    let err = |e: planminer::Error| e.to_string();
    let corpus = generate_synthetic(&SynthConfig {
        n_patients: 12,
        ..SynthConfig::default()
    })
    .map_err(err)?;
    let ds = Extractor::default().build_dataset(&corpus.notes, 42).map_err(err)?;
    let (xs, ys) = analyze_all(&ds.examples, &TextProcessor::default());
    let k = 5;
    let plan = kfold_split(&ys, k, 42).map_err(err)?;

    let mut seen: Vec<usize> = plan.folds.iter().flatten().copied().collect();
    seen.sort_unstable();
    ensure(seen == (0..xs.len()).collect::<Vec<_>>(), || {
        "folds do not partition the dataset".into()
    })?;
    let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
    ensure(spread <= 1, || format!("fold sizes {sizes:?}"))?;

    let train_idx = plan.train_indices(0);
    let test_idx = plan.test_indices(0);
    let train_refs: Vec<&AnalyzedSentence> = train_idx.iter().map(|&i| &xs[i]).collect();
    let train_ys: Vec<bool> = train_idx.iter().map(|&i| ys[i]).collect();

    let svm = match KindTrainer::new(ModelKind::SvmAll, ClassifierConfig::default())
        .fit(&train_refs, &train_ys, 42)
        .map_err(err)?
    {
        TrainedModel::Svm(m) => m,
        TrainedModel::Cnn(_) => return Err("svm_all produced a CNN".into()),
    };
    let train_names: HashSet<String> = train_refs
        .iter()
        .flat_map(|x| svm.extractor.names(&x.context()))
        .collect();
    let test_only: HashSet<String> = test_idx
        .iter()
        .flat_map(|&i| svm.extractor.names(&xs[i].context()))
        .filter(|n| !train_names.contains(n))
        .collect();
    ensure(!test_only.is_empty(), || "fixture has no test-only features".into())?;
    if let Some(n) = test_only.iter().find(|n| svm.vocabulary.get(n).is_some()) {
        return Err(format!("test-only feature {n:?} has a vocabulary index"));
    }

    let cnn = match KindTrainer::new(ModelKind::CnnRandom, tiny_cnn(ModelKind::CnnRandom))
        .fit(&train_refs, &train_ys, 42)
        .map_err(err)?
    {
        TrainedModel::Cnn(m) => m,
        TrainedModel::Svm(_) => return Err("cnn_random produced an SVM".into()),
    };
    let train_words: HashSet<&str> = train_refs
        .iter()
        .flat_map(|x| x.words.iter().map(String::as_str))
        .collect();
    let test_words: HashSet<&str> = test_idx
        .iter()
        .flat_map(|&i| xs[i].words.iter().map(String::as_str))
        .filter(|w| !train_words.contains(w))
        .collect();
    if let Some(w) = test_words.iter().find(|w| cnn.model.vocabulary.get(w).is_some()) {
        return Err(format!("test-only token {w:?} has a CNN vocabulary index"));
    }

    let report = || -> Result<String, String> {
        let plan = kfold_split(&ys, k, 42).map_err(err)?;
        let rows: Vec<(String, MetricsReport)> = [ModelKind::SvmBow, ModelKind::SvmAll]
            .into_iter()
            .map(|kind| {
                let trainer = KindTrainer::new(kind, ClassifierConfig::default());
                cross_validate_with_plan(&xs, &ys, &trainer, &plan).map(|m| (kind.to_string(), m))
            })
            .collect::<Result<_, _>>()
            .map_err(err)?;
        Ok(format!("{}{}", metrics_to_csv(&rows), metrics_to_markdown(&rows)))
    };
    let first = report()?;
    let second = report()?;
    ensure(first == second, || "reports differ between identical runs".into())?;
    ensure(kfold_split(&ys, k, 42).map_err(err)? == plan, || {
        "fold plan is not reproducible".into()
    })?;
    Ok(format!(
        "{} examples, fold sizes {sizes:?}, {} test-only features and {} test-only tokens unindexed, reports identical",
        xs.len(),
        test_only.len(),
        test_words.len()
    ))
}

fn learning_curve_shape(data: &Synthetic) -> Outcome {
    let trainer = KindTrainer::new(ModelKind::SvmAll, ClassifierConfig::default());
    let (sx, sy) = &data.set_aside;
    let points = learning_curve(&data.xs, &data.ys, Some((sx, sy)), &trainer, 3, 42, &curve_fractions())
        .map_err(|e| e.to_string())?;
    ensure(points.len() == 100, || format!("{} points", points.len()))?;
    ensure(points.iter().all(|p| p.valid == p.cv_f1.is_some()), || {
        "validity flag disagrees with value".into()
    })?;
    let first = points[0].cv_f1.unwrap_or(0.0);
    let last = points[99].cv_f1.ok_or("full-data point is invalid")?;
    let max = points.iter().filter_map(|p| p.cv_f1).fold(f64::NEG_INFINITY, f64::max);
    let tail: Vec<f64> = points[70..].iter().filter_map(|p| p.cv_f1).collect();
    ensure(tail.len() == 30, || "invalid points among the last 30".into())?;
    let tail_mean = tail.iter().sum::<f64>() / 30.0;
    let invalid = points.iter().filter(|p| !p.valid).count();
    let summary =
        format!("F1(1%) {first:.3}, F1(100%) {last:.3}, max {max:.3}, last-30 mean {tail_mean:.3}, {invalid} flagged");
    ensure(last >= first, || format!("curve ends below its start: {summary}"))?;
    ensure(max - tail_mean <= 0.02, || format!("no asymptote: {summary}"))?;
    Ok(summary)
}

fn corpus_statistics(notes: &[ClinicalNote]) -> Outcome {
    let ex = Extractor::default().extract_corpus(notes);
    let stats = corpus_stats(notes, &ex).map_err(|e| e.to_string())?;
    let n = stats.notes_with_secap as u64;
    let rate = 0.13;
    let binom = Binomial::new(rate, n).map_err(|e| e.to_string())?;
    let (lo, hi) = (binom.inverse_cdf(0.005), binom.inverse_cdf(0.995));
    let headed = stats.notes_with_plan_headings as u64;
    let summary = format!(
        "{headed}/{n} headed ({:.3}), 99% interval [{lo}, {hi}]",
        stats.ratios.plan_headed_notes_of_secap
    );
    ensure(n >= 1000, || format!("only {n} notes with an assessment section"))?;
    ensure((lo..=hi).contains(&headed), || summary.clone())?;
    Ok(summary)
}

fn main() -> ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let data: OnceCell<Result<Synthetic, String>> = OnceCell::new();
    let corpus_notes = || -> Result<Vec<ClinicalNote>, String> {
        generate_synthetic(&SynthConfig::default())
            .map(|c| c.notes)
            .map_err(|e| e.to_string())
    };
    let mut failed = 0;
    let mut run = |id: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        if filter.as_deref().is_some_and(|p| !name.contains(p)) {
            return;
        }
        let start = Instant::now();
        let mut outcome = f();
        let elapsed = start.elapsed();
        if outcome.is_ok() && elapsed > limit {
            outcome = Err(format!("took {elapsed:.1?}, limit {limit:?}"));
        }
        match outcome {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail}) [{elapsed:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({detail}) [{elapsed:.2?}]");
            }
        }
    };
    let secs = Duration::from_secs;
    let synthetic_data =
        || -> Result<&Synthetic, String> { data.get_or_init(synthetic).as_ref().map_err(Clone::clone) };

    run(1, "metric_arithmetic", secs(1), &mut metric_arithmetic);
    run(2, "extractor_golden", secs(1), &mut extractor_golden);
    run(3, "baseline_pattern", secs(30), &mut baseline_pattern);
    run(
        4,
        "model_recovery",
        secs(600),
        &mut || model_recovery(synthetic_data()?),
    );
    run(5, "gradient_oracle", secs(60), &mut gradient_oracle);
    run(6, "svm_oracle", secs(60), &mut svm_oracle);
    run(7, "fisher_pmi_oracle", secs(60), &mut fisher_pmi_oracle);
    run(8, "cv_laws", secs(60), &mut cv_laws);
    run(9, "learning_curve", secs(900), &mut || {
        learning_curve_shape(synthetic_data()?)
    });
    run(10, "corpus_statistics", secs(10), &mut || {
        corpus_statistics(&corpus_notes()?)
    });

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
