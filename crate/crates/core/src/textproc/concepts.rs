//! Dictionary-based concept matching over lemmas.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::table_lines;

use super::{Lemmatizer, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
struct ConceptEntry {
    concept_id: String,
    semantic_group: String,
}

/// Term → concept table keyed by lemma sequences.
#[derive(Debug, Clone, Default)]
pub struct ConceptDictionary {
    entries: HashMap<Vec<String>, ConceptEntry>,
    max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptMatch {
    pub concept_id: String,
    pub semantic_group: String,
    /// Token index range.
    pub span: Range<usize>,
}

impl ConceptDictionary {
    /// Parses a `term<TAB>concept_id<TAB>semantic_group` table. Terms are
    /// tokenized and lemmatized the same way sentences are; the first entry for
    /// a term wins.
    pub fn parse(table: &str, source: &str, lemmatizer: &Lemmatizer) -> Result<Self> {
        let mut dict = ConceptDictionary::default();
        for (lineno, line) in table_lines(table) {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::parse(
                    source,
                    lineno,
                    "expected `term<TAB>concept_id<TAB>semantic_group`",
                ));
            }
            let key: Vec<String> = super::tokenize(cols[0])
                .into_iter()
                .map(|(surface, _)| lemmatizer.lemma(surface))
                .collect();
            if key.is_empty() {
                return Err(Error::parse(source, lineno, "empty term"));
            }
            dict.max_len = dict.max_len.max(key.len());
            dict.entries.entry(key).or_insert(ConceptEntry {
                concept_id: cols[1].to_string(),
                semantic_group: cols[2].to_string(),
            });
        }
        Ok(dict)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Greedy left-to-right longest match. Matches never overlap.
pub fn match_concepts(tokens: &[Token], dict: &ConceptDictionary) -> Vec<ConceptMatch> {
    let mut out = Vec::new();
    if dict.is_empty() {
        return out;
    }
    let lemmas: Vec<String> = tokens.iter().map(|t| t.lemma.clone()).collect();
    let mut i = 0;
    while i < lemmas.len() {
        let longest = dict.max_len.min(lemmas.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|len| dict.entries.get(&lemmas[i..i + len]).map(|e| (len, e)));
        match hit {
            Some((len, entry)) => {
                out.push(ConceptMatch {
                    concept_id: entry.concept_id.clone(),
                    semantic_group: entry.semantic_group.clone(),
                    span: i..i + len,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}
