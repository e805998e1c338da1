//! Trigger-rule negation and hypothetical detection.
//!
//! A negation trigger counts only when a content token follows it within five
//! tokens, before any `but` or `,`. Hypothetical triggers count wherever they occur.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::util::table_lines;

use super::Token;

const NEGATION_WINDOW: usize = 5;
const SCOPE_BREAKERS: &[&str] = &["but", ","];
const STOPWORDS: &[&str] = &[
    "the", "a", "an", "of", "to", "and", "or", "in", "on", "for", "with", "at", "by", "is", "are", "was", "were", "be",
    "been", "his", "her", "their", "any",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssertionKind {
    Negated,
    Hypothetical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerSpan {
    pub kind: AssertionKind,
    pub tokens: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionFlags {
    pub negated: bool,
    pub hypothetical: bool,
    pub trigger_spans: Vec<TriggerSpan>,
}

/// Trigger phrases as lowercase token sequences, longest first.
#[derive(Debug, Clone, Default)]
pub struct AssertionTriggers {
    negation: Vec<Vec<String>>,
    hypothetical: Vec<Vec<String>>,
}

fn parse_phrases(text: &str) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = table_lines(text)
        .map(|(_, l)| {
            super::tokenize(l)
                .into_iter()
                .map(|(s, _)| s.to_lowercase())
                .collect::<Vec<_>>()
        })
        .filter(|p| !p.is_empty())
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    out.dedup();
    out
}

impl AssertionTriggers {
    pub fn parse(negation: &str, hypothetical: &str) -> Self {
        AssertionTriggers {
            negation: parse_phrases(negation),
            hypothetical: parse_phrases(hypothetical),
        }
    }
}

fn match_at(lower: &[String], i: usize, phrases: &[Vec<String>]) -> Option<usize> {
    phrases
        .iter()
        .find(|p| lower.len() >= i + p.len() && lower[i..i + p.len()] == p[..])
        .map(Vec::len)
}

fn is_content(t: &Token, lower: &str) -> bool {
    !t.is_punct() && !STOPWORDS.contains(&lower)
}

pub fn detect_assertions(tokens: &[Token], triggers: &AssertionTriggers) -> AssertionFlags {
    let lower: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let mut flags = AssertionFlags::default();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(len) = match_at(&lower, i, &triggers.negation) {
            let scope_end = (i + len + NEGATION_WINDOW).min(tokens.len());
            let in_scope = (i + len..scope_end)
                .take_while(|&j| !SCOPE_BREAKERS.contains(&lower[j].as_str()))
                .any(|j| is_content(&tokens[j], &lower[j]) && match_at(&lower, j, &triggers.negation).is_none());
            if in_scope {
                flags.negated = true;
                flags.trigger_spans.push(TriggerSpan {
                    kind: AssertionKind::Negated,
                    tokens: i..i + len,
                });
            }
            i += len;
            continue;
        }
        if let Some(len) = match_at(&lower, i, &triggers.hypothetical) {
            flags.hypothetical = true;
            flags.trigger_spans.push(TriggerSpan {
                kind: AssertionKind::Hypothetical,
                tokens: i..i + len,
            });
            i += len;
            continue;
        }
        i += 1;
    }
    flags
}

#[cfg(test)]
mod tests {
    use crate::textproc::TextProcessor;

    fn flags(text: &str) -> super::AssertionFlags {
        TextProcessor::default().analyze(text).assertions
    }

    #[test]
    fn negation_example() {
        let f = flags("No significant changes since the prior exam");
        assert!(f.negated);
        assert!(!f.hypothetical);
        assert_eq!(f.trigger_spans[0].tokens, 0..1);
    }

    #[test]
    fn hypothetical_example() {
        let f = flags("Call back if symptoms persist or worsen");
        assert!(f.hypothetical);
        assert!(!f.negated);
    }

    #[test]
    fn no_triggers() {
        let f = flags("Lipid panel");
        assert!(!f.negated && !f.hypothetical && f.trigger_spans.is_empty());
    }

    #[test]
    fn scope_terminates() {
        assert!(!flags("No, but").negated);
        assert!(!flags("Not , pain").negated);
        assert!(flags("Denies chest pain or shortness of breath").negated);
        assert!(flags("Negative for fever").negated);
        assert!(flags("Take albuterol as needed for wheezing").hypothetical);
    }
}
