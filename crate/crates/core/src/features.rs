//! Sparse feature extraction for the linear model and PMI / Fisher feature selection.
//!
//! Feature names are namespaced strings:
//!
//! | family     | names                                                        |
//! |------------|--------------------------------------------------------------|
//! | bow        | `bow:<lemma>`                                                |
//! | paths      | `path2:a_b`, `path3:a_b_c`, `path4:a_b_c_d`                  |
//! | concepts   | `cui:<concept id>`                                           |
//! | verbs      | `verb:future`, `verb:past`, `verb:present`, `verb:imperative`, `verb:aux` |
//! | assertions | `assert:neg`, `assert:hyp`                                   |
//! | globals    | `glob:sec=..`, `glob:ntype=..`, `glob:ncat=..`, `glob:prov=..` |
//!
//! Path lengths count tokens. Paths follow head links from a
//! [`DependencyProvider`]; the default [`LinearChain`] makes every token's head
//! its left neighbour, so paths reduce to surface n-grams.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::sectioning::SectionLabel;
use crate::textproc::{TextAnalysis, Token};

/// Bijective feature-name ↔ index map.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    names: Vec<String>,
    frozen: bool,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let mut v = Vocabulary::from_names(r.names);
        v.frozen = r.frozen;
        v
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            names: v.names,
            frozen: v.frozen,
        }
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    /// A frozen vocabulary over `names` in the given order; repeated names keep their first index.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary::new();
        for n in names {
            v.intern(&n.into());
        }
        v.frozen = true;
        v
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of `name`, allocating a new one unless frozen.
    pub fn intern(&mut self, name: &str) -> Option<usize> {
        if let Some(&i) = self.index.get(name) {
            return Some(i);
        }
        if self.frozen {
            return None;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        Some(i)
    }
}

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Contract("duplicate feature index".into()));
        }
        if let Some(&(i, _)) = entries.iter().find(|e| e.0 >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: i + 1,
            });
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::Contract("non-finite feature value".into()));
        }
        Ok(FeatureVector { dim, entries })
    }

    /// Binary vector with value 1.0 at each index.
    pub fn binary(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        FeatureVector::new(dim, set.into_iter().map(|i| (i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }

    pub fn scaled(&self, k: f64) -> FeatureVector {
        FeatureVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * k)).collect(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }
}

/// Which feature families to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFamilies {
    pub bow: bool,
    pub paths: bool,
    pub concepts: bool,
    pub verbs: bool,
    pub assertions: bool,
    pub globals: bool,
}

impl FeatureFamilies {
    pub fn all() -> Self {
        FeatureFamilies {
            bow: true,
            paths: true,
            concepts: true,
            verbs: true,
            assertions: true,
            globals: true,
        }
    }

    pub fn bow_only() -> Self {
        FeatureFamilies {
            bow: true,
            paths: false,
            concepts: false,
            verbs: false,
            assertions: false,
            globals: false,
        }
    }
}

impl Default for FeatureFamilies {
    fn default() -> Self {
        FeatureFamilies::all()
    }
}

/// Head index for every token (`None` for a root).
pub trait DependencyProvider: Send + Sync + std::fmt::Debug {
    fn heads(&self, tokens: &[&Token]) -> Vec<Option<usize>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearChain;

impl DependencyProvider for LinearChain {
    fn heads(&self, tokens: &[&Token]) -> Vec<Option<usize>> {
        (0..tokens.len()).map(|i| i.checked_sub(1)).collect()
    }
}

/// Sentence-level context used for global features.
#[derive(Debug, Clone, Copy)]
pub struct SentenceContext<'a> {
    pub analysis: &'a TextAnalysis,
    pub section_label: SectionLabel,
    pub note_type: &'a str,
    pub note_category: &'a str,
    pub provider_type: &'a str,
}

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    families: FeatureFamilies,
    provider: Arc<dyn DependencyProvider>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor::new(FeatureFamilies::all())
    }
}

impl FeatureExtractor {
    pub fn new(families: FeatureFamilies) -> Self {
        FeatureExtractor {
            families,
            provider: Arc::new(LinearChain),
        }
    }

    pub fn with_provider(mut self, provider: Arc<dyn DependencyProvider>) -> Self {
        self.provider = provider;
        self
    }

    pub fn families(&self) -> FeatureFamilies {
        self.families
    }

    /// Sorted, de-duplicated feature names of one sentence.
    pub fn names(&self, ctx: &SentenceContext<'_>) -> Vec<String> {
        let f = self.families;
        let a = ctx.analysis;
        let mut out = BTreeSet::new();
        let words: Vec<&Token> = a.content_tokens().collect();
        if f.bow {
            out.extend(words.iter().map(|t| format!("bow:{}", t.lemma)));
        }
        if f.paths {
            let heads = self.provider.heads(&words);
            for start in 0..words.len() {
                let mut path = vec![start];
                while path.len() < 4 {
                    match heads[*path.last().unwrap()] {
                        Some(h) if !path.contains(&h) => path.push(h),
                        _ => break,
                    }
                    let lemmas: Vec<&str> = path.iter().rev().map(|&i| words[i].lemma.as_str()).collect();
                    out.insert(format!("path{}:{}", path.len(), lemmas.join("_")));
                }
            }
        }
        if f.concepts {
            out.extend(a.concepts.iter().map(|c| format!("cui:{}", c.concept_id)));
        }
        if f.verbs {
            let v = &a.verbs;
            for (on, name) in [
                (v.has_future, "verb:future"),
                (v.has_past, "verb:past"),
                (v.has_present, "verb:present"),
                (v.imperative_start, "verb:imperative"),
                (v.has_auxiliary, "verb:aux"),
            ] {
                if on {
                    out.insert(name.to_string());
                }
            }
        }
        if f.assertions {
            if a.assertions.negated {
                out.insert("assert:neg".to_string());
            }
            if a.assertions.hypothetical {
                out.insert("assert:hyp".to_string());
            }
        }
        if f.globals && !a.tokens.is_empty() {
            out.insert(format!("glob:sec={}", ctx.section_label));
            out.insert(format!("glob:ntype={}", ctx.note_type));
            out.insert(format!("glob:ncat={}", ctx.note_category));
            out.insert(format!("glob:prov={}", ctx.provider_type));
        }
        out.into_iter().collect()
    }

    /// Interns names while `vocab` is unfrozen; unknown names are dropped once frozen.
    pub fn extract(&self, ctx: &SentenceContext<'_>, vocab: &mut Vocabulary) -> FeatureVector {
        let idx: Vec<usize> = self.names(ctx).iter().filter_map(|n| vocab.intern(n)).collect();
        FeatureVector::binary(vocab.len(), idx).expect("interned indices are in range")
    }
}

/// Binary vector of `names` against a fixed vocabulary; unknown names are dropped.
pub fn vectorize(names: &[String], vocab: &Vocabulary) -> FeatureVector {
    FeatureVector::binary(vocab.len(), names.iter().filter_map(|n| vocab.get(n)))
        .expect("vocabulary indices are in range")
}

/// Natural-log PMI `ln(n11·N / (n1·n_1))`; `-∞` when `n11 = 0`.
pub fn pmi(n11: u64, n1: u64, n_1: u64, n: u64) -> Result<f64> {
    if n1 == 0 || n_1 == 0 || n == 0 || n11 > n1.min(n_1) || n1 > n || n_1 > n {
        return Err(Error::Contract(format!(
            "invalid contingency counts n11={n11} n1.={n1} n.1={n_1} N={n}"
        )));
    }
    if n11 == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let num = u128::from(n11) * u128::from(n);
    let den = u128::from(n1) * u128::from(n_1);
    if num == den {
        return Ok(0.0);
    }
    Ok((num as f64 / den as f64).ln())
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Two-sided Fisher exact test for the table `[[a, b], [c, d]]`.
///
/// Sums the hypergeometric probabilities of every table with the observed
/// margins whose probability does not exceed the observed one.
pub fn fisher_exact_p(a: u64, b: u64, c: u64, d: u64) -> Result<f64> {
    let n = a + b + c + d;
    if n == 0 {
        return Err(Error::Contract("empty contingency table".into()));
    }
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let ln_denom = ln_choose(n, c1);
    let ln_p = |x: u64| ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_denom;
    let observed = ln_p(a);
    let slack = 1e-12 * ln_factorial(n).max(1.0);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let mut p = 0.0;
    let mut total = 0.0;
    for x in lo..=hi {
        let lp = ln_p(x);
        let px = lp.exp();
        total += px;
        if lp <= observed + slack {
            p += px;
        }
    }
    debug_assert!((total - 1.0).abs() < 1e-10, "hypergeometric mass {total}");
    Ok(p.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub df_min: u64,
    pub p_max: f64,
    pub top_k: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            df_min: 2,
            p_max: 0.05,
            top_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub feature: String,
    pub df: u64,
    /// Larger of the positive-class and negative-class PMI.
    pub pmi: f64,
    pub p_value: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub vocabulary: Vocabulary,
    /// One row per input feature, in input vocabulary order.
    pub scores: Vec<SelectionScore>,
}

/// Keeps features with `df ≥ df_min` and Fisher `p ≤ p_max`, ranked by PMI
/// (ties by name) and optionally capped at `top_k`.
///
/// `rows[i]` holds the distinct feature indices of example `i` in `vocab`.
pub fn select_features(
    rows: &[Vec<usize>],
    labels: &[bool],
    vocab: &Vocabulary,
    cfg: &SelectionConfig,
) -> Result<Selection> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    let n = rows.len() as u64;
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = n - n_pos;
    let mut df = vec![0u64; vocab.len()];
    let mut pos = vec![0u64; vocab.len()];
    for (row, &label) in rows.iter().zip(labels) {
        for &f in row {
            if f >= vocab.len() {
                return Err(Error::DimensionMismatch {
                    expected: vocab.len(),
                    found: f + 1,
                });
            }
            df[f] += 1;
            if label {
                pos[f] += 1;
            }
        }
    }
    let mut scores = Vec::with_capacity(vocab.len());
    for (f, name) in vocab.names().iter().enumerate() {
        let (d, a) = (df[f], pos[f]);
        if a > n_pos || d - a > n_neg {
            return Err(Error::Contract(format!(
                "feature {name} occurs more than once in an example"
            )));
        }
        let p_value = if n == 0 {
            1.0
        } else {
            fisher_exact_p(a, d - a, n_pos - a, n_neg - (d - a))?
        };
        let class_pmi = |hits: u64, class: u64| {
            if d == 0 || class == 0 {
                f64::NEG_INFINITY
            } else {
                pmi(hits, d, class, n).unwrap_or(f64::NEG_INFINITY)
            }
        };
        let score = class_pmi(a, n_pos).max(class_pmi(d - a, n_neg));
        scores.push(SelectionScore {
            feature: name.clone(),
            df: d,
            pmi: score,
            p_value,
            kept: d >= cfg.df_min && p_value <= cfg.p_max,
        });
    }
    let mut ranked: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].kept).collect();
    ranked.sort_by(|&i, &j| {
        scores[j]
            .pmi
            .total_cmp(&scores[i].pmi)
            .then_with(|| scores[i].feature.cmp(&scores[j].feature))
    });
    if let Some(k) = cfg.top_k {
        for &i in ranked.iter().skip(k) {
            scores[i].kept = false;
        }
        ranked.truncate(k);
    }
    let vocabulary = Vocabulary::from_names(ranked.iter().map(|&i| scores[i].feature.clone()));
    Ok(Selection { vocabulary, scores })
}

/// CSV report `feature,df,pmi,p_value,kept`.
pub fn write_selection_report<W: Write>(scores: &[SelectionScore], mut out: W) -> std::io::Result<()> {
    writeln!(out, "feature,df,pmi,p_value,kept")?;
    for s in scores {
        let name = if s.feature.contains([',', '"']) {
            format!("\"{}\"", s.feature.replace('"', "\"\""))
        } else {
            s.feature.clone()
        };
        writeln!(out, "{},{},{},{:e},{}", name, s.df, s.pmi, s.p_value, s.kept)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::TextProcessor;
    use proptest::prelude::*;

    fn names_of(text: &str, fam: FeatureFamilies) -> Vec<String> {
        let tp = TextProcessor::default();
        let a = tp.analyze(text);
        let ctx = SentenceContext {
            analysis: &a,
            section_label: SectionLabel::SecAp,
            note_type: "progress",
            note_category: "outpatient",
            provider_type: "physician",
        };
        FeatureExtractor::new(fam).names(&ctx)
    }

    #[test]
    fn imperative_sentence_features() {
        let names = names_of("Check home BPs daily", FeatureFamilies::all());
        for n in [
            "verb:imperative",
            "bow:check",
            "path2:check_home",
            "path3:check_home_bp",
            "path4:check_home_bp_daily",
            "glob:sec=secAP",
            "glob:ntype=progress",
        ] {
            assert!(names.contains(&n.to_string()), "missing {n} in {names:?}");
        }
        assert!(names.iter().any(|n| n.starts_with("cui:")));
    }

    #[test]
    fn negated_sentence() {
        let names = names_of("No significant changes since the prior exam", FeatureFamilies::all());
        assert!(names.contains(&"assert:neg".to_string()));
    }

    #[test]
    fn empty_sentence_is_empty_vector() {
        assert!(names_of("", FeatureFamilies::all()).is_empty());
        let mut v = Vocabulary::new();
        let tp = TextProcessor::default();
        let a = tp.analyze("");
        let ctx = SentenceContext {
            analysis: &a,
            section_label: SectionLabel::Other,
            note_type: "x",
            note_category: "y",
            provider_type: "z",
        };
        assert!(FeatureExtractor::default().extract(&ctx, &mut v).is_empty());
    }

    #[test]
    fn bow_only_family() {
        let names = names_of("Will check LDL.", FeatureFamilies::bow_only());
        assert!(names.iter().all(|n| n.starts_with("bow:")));
        assert_eq!(names, vec!["bow:check", "bow:ldl", "bow:will"]);
    }

    #[test]
    fn frozen_vocabulary_drops_unknown() {
        let mut v = Vocabulary::new();
        assert_eq!(v.intern("a"), Some(0));
        assert_eq!(v.intern("b"), Some(1));
        assert_eq!(v.intern("a"), Some(0));
        v.freeze();
        assert_eq!(v.intern("c"), None);
        assert_eq!(v.len(), 2);
        let fv = vectorize(&["b".into(), "zzz".into()], &v);
        assert_eq!(fv.entries(), &[(1, 1.0)]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn pmi_values() {
        assert_eq!(pmi(25, 50, 50, 100).unwrap(), 0.0);
        assert!((pmi(10, 10, 10, 100).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert_eq!(pmi(0, 10, 10, 100).unwrap(), f64::NEG_INFINITY);
        assert!(pmi(1, 0, 10, 100).is_err());
    }

    #[test]
    fn fisher_known_tables() {
        assert!((fisher_exact_p(5, 5, 5, 5).unwrap() - 1.0).abs() < 1e-12);
        let expected = 2.0 / 184_756.0;
        assert!((fisher_exact_p(10, 0, 0, 10).unwrap() - expected).abs() < 1e-15);
        assert!(fisher_exact_p(0, 0, 0, 0).is_err());
    }

    #[test]
    fn selection_identity_and_ties() {
        let vocab = Vocabulary::from_names(["b", "a", "c"]);
        let rows = vec![vec![0, 1], vec![1], vec![2], vec![]];
        let labels = vec![true, true, false, false];
        let id = SelectionConfig {
            df_min: 0,
            p_max: 1.0,
            top_k: None,
        };
        let sel = select_features(&rows, &labels, &vocab, &id).unwrap();
        assert_eq!(sel.vocabulary.len(), 3);
        assert!(sel.scores.iter().all(|s| s.kept));

        // "a" and "b" have identical counts here; the cap keeps the lexicographically first.
        let rows = vec![vec![0, 1], vec![0, 1], vec![2], vec![]];
        let capped = SelectionConfig { top_k: Some(1), ..id };
        let sel = select_features(&rows, &labels, &vocab, &capped).unwrap();
        assert_eq!(sel.vocabulary.names(), &["a".to_string()]);
    }

    #[test]
    fn positive_only_feature_survives_defaults() {
        let vocab = Vocabulary::from_names(["pos", "noise"]);
        let rows: Vec<Vec<usize>> = (0..20).map(|i| if i < 10 { vec![0, 1] } else { vec![1] }).collect();
        let labels: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let sel = select_features(&rows, &labels, &vocab, &SelectionConfig::default()).unwrap();
        assert_eq!(sel.vocabulary.names(), &["pos".to_string()]);
        let mut csv = Vec::new();
        write_selection_report(&sel.scores, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("feature,df,pmi,p_value,kept\npos,10,"));
    }

    proptest! {
        #[test]
        fn fisher_symmetric_under_row_and_column_swap(a in 0u64..15, b in 0u64..15, c in 0u64..15, d in 0u64..15) {
            prop_assume!(a + b + c + d > 0);
            let p = fisher_exact_p(a, b, c, d).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert!((p - fisher_exact_p(d, c, b, a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn pmi_zero_on_integer_independent_tables(r in 1u64..40, c in 1u64..40, k in 1u64..20) {
            // The table [[rc, rk], [kc, kk]] is an outer product, hence independent.
            let n = (r + k) * (c + k);
            let n1 = r * (c + k);
            let n_1 = c * (r + k);
            let n11 = r * c;
            prop_assert_eq!(pmi(n11, n1, n_1, n).unwrap(), 0.0);
        }

        #[test]
        fn selection_invariant_to_example_order(
            rows in proptest::collection::vec((proptest::collection::btree_set(0usize..6, 0..4), any::<bool>()), 4..20),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let vocab = Vocabulary::from_names((0..6).map(|i| format!("f{i}")));
            let (r, l): (Vec<Vec<usize>>, Vec<bool>) = rows.iter().map(|(s, y)| (s.iter().copied().collect(), *y)).unzip();
            let cfg = SelectionConfig { df_min: 1, p_max: 0.9, top_k: Some(3) };
            let a = select_features(&r, &l, &vocab, &cfg).unwrap();
            let mut order: Vec<usize> = (0..r.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let r2: Vec<_> = order.iter().map(|&i| r[i].clone()).collect();
            let l2: Vec<_> = order.iter().map(|&i| l[i]).collect();
            let b = select_features(&r2, &l2, &vocab, &cfg).unwrap();
            prop_assert_eq!(a.vocabulary, b.vocabulary);
        }
    }
}
