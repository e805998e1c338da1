//! Rule-based NLP substrate: segmentation, tokenization with lemmas, concept
//! lookup, verb morphology and assertion triggers.
//!
//! All behaviour is driven by plain-text rule tables. The defaults under
//! `data/` are compiled in; [`RuleTables::from_dir`] loads edited copies.

mod assertions;
mod concepts;
mod lemma;
mod segment;
mod verbs;

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::util::read_to_string;

pub use assertions::{detect_assertions, AssertionFlags, AssertionKind, AssertionTriggers, TriggerSpan};
pub use concepts::{match_concepts, ConceptDictionary, ConceptMatch};
pub use lemma::Lemmatizer;
pub use segment::{
    header_prefix_len, list_marker_len, segment_sentences, split_lines, strip_list_marker, LineInfo, NoteLayout,
    SentenceSpan,
};
pub use verbs::{analyze_verbs, VerbLexicon, VerbProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarsePos {
    Verb,
    Modal,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub position: usize,
    pub coarse_pos: CoarsePos,
}

impl Token {
    pub fn is_punct(&self) -> bool {
        !self.surface.chars().any(char::is_alphanumeric)
    }
}

static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\p{L}\p{N}]+(?:['’./\-][\p{L}\p{N}]+)*|[^\s\p{L}\p{N}]").unwrap());

/// Word and punctuation tokens with their byte offsets.
pub(crate) fn tokenize(text: &str) -> Vec<(&str, usize)> {
    TOKEN.find_iter(text).map(|m| (m.as_str(), m.start())).collect()
}

/// Source text of every rule table.
#[derive(Debug, Clone)]
pub struct RuleTables {
    pub lemma_exceptions: String,
    pub verbs: String,
    pub modals: String,
    pub negation_triggers: String,
    pub hypothetical_triggers: String,
    pub concepts: String,
}

impl Default for RuleTables {
    fn default() -> Self {
        RuleTables {
            lemma_exceptions: include_str!("../../data/lemma_exceptions.txt").to_string(),
            verbs: include_str!("../../data/verbs.txt").to_string(),
            modals: include_str!("../../data/modals.txt").to_string(),
            negation_triggers: include_str!("../../data/negation_triggers.txt").to_string(),
            hypothetical_triggers: include_str!("../../data/hypothetical_triggers.txt").to_string(),
            concepts: include_str!("../../data/concepts.tsv").to_string(),
        }
    }
}

impl RuleTables {
    /// Loads tables from `dir`, falling back to the built-in copy for any file
    /// that is absent.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut tables = RuleTables::default();
        let slots: [(&str, &mut String); 6] = [
            ("lemma_exceptions.txt", &mut tables.lemma_exceptions),
            ("verbs.txt", &mut tables.verbs),
            ("modals.txt", &mut tables.modals),
            ("negation_triggers.txt", &mut tables.negation_triggers),
            ("hypothetical_triggers.txt", &mut tables.hypothetical_triggers),
            ("concepts.tsv", &mut tables.concepts),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = read_to_string(&path)?;
            }
        }
        Ok(tables)
    }
}

/// Everything the classifiers need to know about one sentence's text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextAnalysis {
    pub tokens: Vec<Token>,
    pub concepts: Vec<ConceptMatch>,
    pub verbs: VerbProfile,
    pub assertions: AssertionFlags,
}

impl TextAnalysis {
    pub fn content_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| !t.is_punct())
    }
}

/// Immutable bundle of loaded rule tables. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct TextProcessor {
    lemmatizer: Lemmatizer,
    verbs: VerbLexicon,
    triggers: AssertionTriggers,
    concepts: ConceptDictionary,
}

impl Default for TextProcessor {
    fn default() -> Self {
        TextProcessor::from_tables(&RuleTables::default()).expect("built-in rule tables are valid")
    }
}

impl TextProcessor {
    pub fn from_tables(tables: &RuleTables) -> Result<Self> {
        let verbs = VerbLexicon::parse(&tables.verbs, "verbs.txt", &tables.modals)?;
        let lemmatizer = Lemmatizer::from_table(&tables.lemma_exceptions, "lemma_exceptions.txt", &verbs)?;
        let concepts = ConceptDictionary::parse(&tables.concepts, "concepts.tsv", &lemmatizer)?;
        let triggers = AssertionTriggers::parse(&tables.negation_triggers, &tables.hypothetical_triggers);
        Ok(TextProcessor {
            lemmatizer,
            verbs,
            triggers,
            concepts,
        })
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    pub fn verb_lexicon(&self) -> &VerbLexicon {
        &self.verbs
    }

    pub fn concepts(&self) -> &ConceptDictionary {
        &self.concepts
    }

    pub fn with_concepts(mut self, concepts: ConceptDictionary) -> Self {
        self.concepts = concepts;
        self
    }

    pub fn tokenize_lemmatize(&self, text: &str) -> Vec<Token> {
        tokenize(text)
            .into_iter()
            .enumerate()
            .map(|(position, (surface, _))| {
                let lemma = self.lemmatizer.lemma(surface);
                let coarse_pos = self.verbs.coarse_pos(&surface.to_lowercase(), &lemma);
                Token {
                    surface: surface.to_string(),
                    lemma,
                    position,
                    coarse_pos,
                }
            })
            .collect()
    }

    pub fn analyze(&self, text: &str) -> TextAnalysis {
        let tokens = self.tokenize_lemmatize(text);
        TextAnalysis {
            concepts: match_concepts(&tokens, &self.concepts),
            verbs: analyze_verbs(&tokens, &self.verbs),
            assertions: detect_assertions(&tokens, &self.triggers),
            tokens,
        }
    }
}
