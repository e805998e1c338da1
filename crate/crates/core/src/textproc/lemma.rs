use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::util::table_lines;

use super::verbs::VerbLexicon;

/// Suffix-rule lemmatizer backed by an exception table.
///
/// Lemmas are lowercase and always a fixed point: `lemma(lemma(w)) == lemma(w)`.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
}

impl Lemmatizer {
    /// `table` is a two-column TSV of surface form and lemma. Inflections from
    /// the verb lexicon are added first, so the table can override them.
    pub fn from_table(table: &str, source: &str, verbs: &VerbLexicon) -> Result<Self> {
        let mut exceptions: HashMap<String, String> = verbs
            .inflections()
            .map(|(form, base)| (form.to_string(), base.to_string()))
            .collect();
        for (lineno, line) in table_lines(table) {
            let mut cols = line.split('\t').map(str::trim).filter(|c| !c.is_empty());
            match (cols.next(), cols.next(), cols.next()) {
                (Some(form), Some(lemma), None) => {
                    exceptions.insert(form.to_lowercase(), lemma.to_lowercase());
                }
                _ => return Err(Error::parse(source, lineno, "expected `form<TAB>lemma`")),
            }
        }
        let mut lem = Lemmatizer { exceptions };
        // Resolve every target to its own fixed point so lookups terminate in one step.
        let keys: Vec<String> = lem.exceptions.keys().cloned().collect();
        for key in keys {
            let target = lem.exceptions[&key].clone();
            let resolved = lem
                .resolve(&target)
                .ok_or_else(|| Error::parse(source, 0, format!("lemma exceptions cycle through {key:?}")))?;
            lem.exceptions.insert(key, resolved);
        }
        Ok(lem)
    }

    fn step(&self, word: &str) -> String {
        match self.exceptions.get(word) {
            Some(lemma) => lemma.clone(),
            None => suffix_rule(word),
        }
    }

    fn resolve(&self, word: &str) -> Option<String> {
        let mut cur = word.to_string();
        for _ in 0..=word.len() + 8 {
            let next = self.step(&cur);
            if next == cur {
                return Some(cur);
            }
            cur = next;
        }
        None
    }

    pub fn lemma(&self, word: &str) -> String {
        let lower = word.to_lowercase();
        if lower.chars().any(|c| c.is_ascii_digit()) || !lower.chars().any(char::is_alphabetic) {
            return lower;
        }
        // Every step either shortens the word or lands on a resolved fixed point.
        self.resolve(&lower).unwrap_or(lower)
    }
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !matches!(b[n - 1], b'a' | b'e' | b'i' | b'o' | b'u' | b'l' | b's' | b'z') {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

fn suffix_rule(w: &str) -> String {
    if !w.chars().all(|c| c.is_ascii_lowercase()) {
        return w.to_string();
    }
    let n = w.len();
    if n >= 5 && w.ends_with("ies") {
        format!("{}y", &w[..n - 3])
    } else if w.ends_with("sses") {
        w[..n - 2].to_string()
    } else if n >= 4 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        w[..n - 1].to_string()
    } else if n >= 6 && w.ends_with("ing") && has_vowel(&w[..n - 3]) {
        undouble(&w[..n - 3])
    } else if n >= 5 && w.ends_with("ed") && !w.ends_with("eed") && has_vowel(&w[..n - 2]) {
        undouble(&w[..n - 2])
    } else {
        w.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::TextProcessor;

    fn lem() -> Lemmatizer {
        TextProcessor::default().lemmatizer().clone()
    }

    #[test]
    fn rule_table_examples() {
        let l = lem();
        let got: Vec<String> = ["Check", "home", "BPs", "daily"].iter().map(|w| l.lemma(w)).collect();
        assert_eq!(got, vec!["check", "home", "bp", "daily"]);
        assert_eq!(l.lemma("run"), "run");
        assert_eq!(l.lemma("started"), "start");
        assert_eq!(l.lemma("taking"), "take");
        assert_eq!(l.lemma("was"), "be");
        assert_eq!(l.lemma("studies"), "study");
        assert_eq!(l.lemma("planned"), "plan");
        assert_eq!(l.lemma("classes"), "class");
        assert_eq!(l.lemma("140/90"), "140/90");
    }

    #[test]
    fn suffix_rules() {
        assert_eq!(suffix_rule("checks"), "check");
        assert_eq!(suffix_rule("walking"), "walk");
        assert_eq!(suffix_rule("stopped"), "stop");
        assert_eq!(suffix_rule("need"), "need");
        assert_eq!(suffix_rule("proceed"), "proceed");
        assert_eq!(suffix_rule("status"), "status");
        assert_eq!(suffix_rule("bus"), "bus");
    }

    #[test]
    fn cyclic_exceptions_are_rejected() {
        let verbs = VerbLexicon::parse("", "v", "").unwrap();
        assert!(Lemmatizer::from_table("ab\tcd\ncd\tab\n", "t", &verbs).is_err());
        assert!(Lemmatizer::from_table("only-one-column\n", "t", &verbs).is_err());
    }
}
