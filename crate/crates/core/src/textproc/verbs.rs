//! Verb lexicon and tense/mood profile of a token sequence.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::table_lines;

use super::{CoarsePos, Token};

const FUTURE_MODALS: &[&str] = &["will", "shall", "may"];
const AUX_LEMMAS: &[&str] = &["be", "have", "do"];
const PRESENT_FORMS: &[&str] = &["is", "are", "am", "has", "does"];
const SKIPPABLE: &[&str] = &["not", "also", "then", "likely", "probably", "need", "still"];

#[derive(Debug, Clone, Default)]
pub struct VerbLexicon {
    bases: HashSet<String>,
    past: HashSet<String>,
    third: HashSet<String>,
    form_to_base: HashMap<String, String>,
    modals: HashSet<String>,
}

impl VerbLexicon {
    /// `verbs` has five tab-separated columns: base, past, past participle,
    /// present participle, third person singular. `modals` is one word per line.
    pub fn parse(verbs: &str, source: &str, modals: &str) -> Result<Self> {
        let mut lex = VerbLexicon::default();
        for (lineno, line) in table_lines(verbs) {
            let cols: Vec<String> = line.split('\t').map(|c| c.trim().to_lowercase()).collect();
            if cols.len() != 5 || cols.iter().any(String::is_empty) {
                return Err(Error::parse(source, lineno, "expected 5 tab-separated verb forms"));
            }
            let base = cols[0].clone();
            if cols[1] != base {
                lex.past.insert(cols[1].clone());
            }
            if cols[4] != base {
                lex.third.insert(cols[4].clone());
            }
            for form in &cols[1..] {
                if *form != base {
                    lex.form_to_base.entry(form.clone()).or_insert_with(|| base.clone());
                }
            }
            lex.bases.insert(base);
        }
        for (_, line) in table_lines(modals) {
            lex.modals.insert(line.trim().to_lowercase());
        }
        Ok(lex)
    }

    pub fn inflections(&self) -> impl Iterator<Item = (&str, &str)> {
        self.form_to_base.iter().map(|(f, b)| (f.as_str(), b.as_str()))
    }

    pub fn is_base(&self, lemma: &str) -> bool {
        self.bases.contains(lemma)
    }

    pub fn is_modal(&self, lower: &str) -> bool {
        self.modals.contains(lower)
    }

    pub fn is_past_form(&self, lower: &str) -> bool {
        self.past.contains(lower)
    }

    pub fn is_present_form(&self, lower: &str) -> bool {
        PRESENT_FORMS.contains(&lower) || self.third.contains(lower)
    }

    pub(crate) fn coarse_pos(&self, lower: &str, lemma: &str) -> CoarsePos {
        if self.is_modal(lower) {
            CoarsePos::Modal
        } else if self.is_base(lemma) {
            CoarsePos::Verb
        } else {
            CoarsePos::Other
        }
    }
}

/// Tense and mood flags of a sentence. Several tense flags can be set at once
/// when clauses disagree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbProfile {
    pub has_future: bool,
    pub has_past: bool,
    pub has_present: bool,
    pub imperative_start: bool,
    /// An auxiliary or modal governs a following verb.
    pub has_auxiliary: bool,
    pub head_verb_lemma: Option<String>,
}

fn lower(t: &Token) -> String {
    t.surface.to_lowercase()
}

fn is_base_form(t: &Token, lex: &VerbLexicon) -> bool {
    t.coarse_pos == CoarsePos::Verb && lower(t) == t.lemma && lex.is_base(&t.lemma)
}

fn is_aux(t: &Token) -> bool {
    t.coarse_pos == CoarsePos::Modal || (t.coarse_pos == CoarsePos::Verb && AUX_LEMMAS.contains(&t.lemma.as_str()))
}

fn looks_verbal(t: &Token) -> bool {
    let l = lower(t);
    t.coarse_pos == CoarsePos::Verb || (l.len() > 4 && (l.ends_with("ed") || l.ends_with("ing")))
}

fn ed_rule(l: &str, lex: &VerbLexicon) -> bool {
    l.len() >= 5
        && l.ends_with("ed")
        && !l.ends_with("eed")
        && l.chars().all(|c| c.is_ascii_lowercase())
        && !lex.is_base(l)
}

pub fn analyze_verbs(tokens: &[Token], lex: &VerbLexicon) -> VerbProfile {
    let mut p = VerbProfile::default();
    let n = tokens.len();

    for i in 0..n {
        let li = lower(&tokens[i]);
        if FUTURE_MODALS.contains(&li.as_str()) {
            let mut j = i + 1;
            let mut skips = 0;
            while j < n && skips < 2 {
                let lj = lower(&tokens[j]);
                if SKIPPABLE.contains(&lj.as_str()) || (lj.len() > 3 && lj.ends_with("ly")) {
                    j += 1;
                    skips += 1;
                } else {
                    break;
                }
            }
            if j < n && is_base_form(&tokens[j], lex) {
                p.has_future = true;
            }
        }
        if li == "going" && i + 2 < n && lower(&tokens[i + 1]) == "to" && is_base_form(&tokens[i + 2], lex) {
            p.has_future = true;
        }

        let after_aux = i > 0 && {
            let prev = &tokens[i - 1];
            prev.coarse_pos == CoarsePos::Verb && matches!(prev.lemma.as_str(), "be" | "have")
        };
        if !after_aux && (lex.is_past_form(&li) || ed_rule(&li, lex)) {
            p.has_past = true;
        }
        if lex.is_present_form(&li) {
            p.has_present = true;
        }
        if is_aux(&tokens[i]) && tokens[i + 1..n.min(i + 3)].iter().any(looks_verbal) {
            p.has_auxiliary = true;
        }
    }

    p.imperative_start = tokens.first().is_some_and(|t| is_base_form(t, lex));

    let verbs: Vec<usize> = (0..n).filter(|&i| tokens[i].coarse_pos == CoarsePos::Verb).collect();
    let main = verbs.iter().copied().find(|&i| {
        let governs =
            AUX_LEMMAS.contains(&tokens[i].lemma.as_str()) && tokens[i + 1..n.min(i + 3)].iter().any(looks_verbal);
        !governs
    });
    p.head_verb_lemma = main.or_else(|| verbs.first().copied()).map(|i| tokens[i].lemma.clone());
    p
}
