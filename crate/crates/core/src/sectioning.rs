//! Header detection and section segmentation.
//!
//! A line is a header candidate when it opens with a short `Words:` prefix or
//! is entirely upper case. Candidates are scored on five cues (lexicon hit,
//! all-caps prefix, terminal colon, short line, first line or preceded by a
//! blank line) and accepted at a score of 2 or more. Plan headings (`P:`,
//! `Plan:`) are subheadings inside assessment sections and never open a new
//! section.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{header_prefix_len, list_marker_len, NoteLayout};
use crate::util::table_lines;

pub const HEADER_THRESHOLD: u8 = 2;
const SHORT_LINE: usize = 40;
const MAX_CAPS_WORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionLabel {
    #[serde(rename = "secAP")]
    SecAp,
    #[serde(rename = "hpi")]
    Hpi,
    #[serde(rename = "meds")]
    Meds,
    #[serde(rename = "other")]
    Other,
    #[serde(rename = "unknown")]
    Unknown,
}

impl SectionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionLabel::SecAp => "secAP",
            SectionLabel::Hpi => "hpi",
            SectionLabel::Meds => "meds",
            SectionLabel::Other => "other",
            SectionLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "secap" => Ok(SectionLabel::SecAp),
            "hpi" => Ok(SectionLabel::Hpi),
            "meds" => Ok(SectionLabel::Meds),
            "other" => Ok(SectionLabel::Other),
            "unknown" => Ok(SectionLabel::Unknown),
            other => Err(format!("unknown section label {other:?}")),
        }
    }
}

/// Lowercase, collapse internal whitespace, drop trailing punctuation.
pub fn normalize_header(raw: &str) -> String {
    raw.trim()
        .trim_end_matches([':', '-', '.'])
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Header lexicon plus the subheadings that must not open a section.
#[derive(Debug, Clone)]
pub struct HeaderRules {
    labels: HashMap<String, SectionLabel>,
    subheadings: HashSet<String>,
}

impl Default for HeaderRules {
    fn default() -> Self {
        HeaderRules::parse(include_str!("../data/section_labels.tsv"), "section_labels.tsv")
            .expect("built-in section labels are valid")
            .with_subheadings(
                crate::plan_extract::HeadingLexicon::default()
                    .entries()
                    .iter()
                    .map(|e| e.form.clone()),
            )
    }
}

impl HeaderRules {
    /// Parses `pattern<TAB>label` lines. Later duplicates override earlier ones.
    pub fn parse(table: &str, source: &str) -> Result<Self> {
        let mut labels = HashMap::new();
        for (lineno, line) in table_lines(table) {
            let mut cols = line.split('\t');
            let (Some(pattern), Some(label), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::parse(source, lineno, "expected two tab-separated columns"));
            };
            let label = label.parse().map_err(|e: String| Error::parse(source, lineno, e))?;
            let key = normalize_header(pattern);
            if key.is_empty() {
                return Err(Error::parse(source, lineno, "empty header pattern"));
            }
            labels.insert(key, label);
        }
        Ok(HeaderRules {
            labels,
            subheadings: HashSet::new(),
        })
    }

    pub fn with_subheadings<I, S>(mut self, forms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.subheadings
            .extend(forms.into_iter().map(|s| normalize_header(s.as_ref())));
        self
    }

    pub fn lexicon_label(&self, header_text: &str) -> Option<SectionLabel> {
        self.labels.get(&normalize_header(header_text)).copied()
    }

    /// Canonical label for a detected header; headers outside the lexicon are `other`.
    pub fn label_for(&self, header_text: &str) -> SectionLabel {
        self.lexicon_label(header_text).unwrap_or(SectionLabel::Other)
    }

    /// Canonical text form of the rules, independent of load order.
    pub fn fingerprint(&self) -> String {
        let mut labels: Vec<String> = self.labels.iter().map(|(k, v)| format!("{k}\t{v}")).collect();
        labels.sort_unstable();
        let mut subs: Vec<&str> = self.subheadings.iter().map(String::as_str).collect();
        subs.sort_unstable();
        format!("{}\n--\n{}", labels.join("\n"), subs.join("\n"))
    }

    pub fn is_subheading(&self, header_text: &str) -> bool {
        self.subheadings.contains(&normalize_header(header_text))
    }
}

/// Where a line sits in its note.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineContext {
    pub line_index: usize,
    /// Byte offset of the line start within the note.
    pub line_start: usize,
    pub after_blank: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionHeader {
    pub line_index: usize,
    /// Byte span of the header text (the prefix, or the whole line).
    pub span: Range<usize>,
    pub raw: String,
    pub canonical_label: SectionLabel,
}

/// Per-cue breakdown of a header candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HeaderCues {
    pub lexicon: bool,
    pub all_caps: bool,
    pub terminal_colon: bool,
    pub short_line: bool,
    pub after_blank: bool,
}

impl HeaderCues {
    pub fn score(&self) -> u8 {
        [
            self.lexicon,
            self.all_caps,
            self.terminal_colon,
            self.short_line,
            self.after_blank,
        ]
        .iter()
        .filter(|&&c| c)
        .count() as u8
    }
}

struct Candidate<'a> {
    /// Offset of the header text within the untrimmed line.
    offset: usize,
    text: &'a str,
    terminal_colon: bool,
}

fn candidate(line: &str) -> Option<Candidate<'_>> {
    let lead = line.len() - line.trim_start().len();
    let trimmed = line.trim();
    if trimmed.is_empty() || list_marker_len(trimmed).is_some() {
        return None;
    }
    if let Some(n) = header_prefix_len(trimmed) {
        let text = trimmed[..n - 1].trim_end();
        return Some(Candidate {
            offset: lead,
            text,
            terminal_colon: trimmed[n..].trim().is_empty(),
        });
    }
    let words = trimmed.split_whitespace().count();
    if words <= MAX_CAPS_WORDS && is_all_caps(trimmed) {
        return Some(Candidate {
            offset: lead,
            text: trimmed,
            terminal_colon: false,
        });
    }
    None
}

fn is_all_caps(s: &str) -> bool {
    s.chars().filter(|c| c.is_alphabetic()).count() >= 2 && !s.chars().any(char::is_lowercase)
}

/// Cue breakdown for a line, or `None` when the line has no header form.
pub fn header_cues(line: &str, ctx: LineContext, rules: &HeaderRules) -> Option<HeaderCues> {
    let c = candidate(line)?;
    if rules.is_subheading(c.text) {
        return None;
    }
    Some(HeaderCues {
        lexicon: rules.lexicon_label(c.text).is_some(),
        all_caps: is_all_caps(c.text),
        terminal_colon: c.terminal_colon,
        short_line: line.trim().chars().count() <= SHORT_LINE,
        after_blank: ctx.after_blank || ctx.line_index == 0,
    })
}

pub fn header_score(line: &str, ctx: LineContext, rules: &HeaderRules) -> u8 {
    header_cues(line, ctx, rules).map_or(0, |c| c.score())
}

pub fn detect_header_line(line: &str, ctx: LineContext, rules: &HeaderRules) -> Option<SectionHeader> {
    if header_score(line, ctx, rules) < HEADER_THRESHOLD {
        return None;
    }
    let c = candidate(line)?;
    let start = ctx.line_start + c.offset;
    Some(SectionHeader {
        line_index: ctx.line_index,
        span: start..start + c.text.len(),
        raw: c.text.to_string(),
        canonical_label: rules.label_for(c.text),
    })
}

/// All header lines of a note, in line order.
pub fn detect_headers(text: &str, layout: &NoteLayout, rules: &HeaderRules) -> Vec<SectionHeader> {
    let mut after_blank = true;
    let mut headers = Vec::new();
    for (line_index, info) in layout.lines.iter().enumerate() {
        if info.blank {
            after_blank = true;
            continue;
        }
        let ctx = LineContext {
            line_index,
            line_start: info.start,
            after_blank,
        };
        if let Some(h) = detect_header_line(&text[info.start..info.end], ctx, rules) {
            headers.push(h);
        }
        after_blank = false;
    }
    headers
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub header: Option<SectionHeader>,
    pub lines: Range<usize>,
    pub sentences: Range<usize>,
    pub label: SectionLabel,
    /// The section is closed by the next header rather than the end of the note.
    pub ends_at_header: bool,
}

/// Splits a note into sections at `headers` (sorted by line).
///
/// Text before the first header forms an unlabeled section when it contains
/// any sentence.
pub fn segment_and_label(layout: &NoteLayout, headers: &[SectionHeader]) -> Vec<Section> {
    debug_assert!(headers.windows(2).all(|w| w[0].line_index < w[1].line_index));
    let n_lines = layout.lines.len();
    let n_sent = layout.sentences.len();
    let mut sections = Vec::with_capacity(headers.len() + 1);
    let first_line = headers.first().map_or(n_lines, |h| h.line_index);
    let lead_end = layout.first_sentence_at_or_after_line(first_line);
    if lead_end > 0 || headers.is_empty() {
        sections.push(Section {
            header: None,
            lines: 0..first_line,
            sentences: 0..lead_end,
            label: SectionLabel::Unknown,
            ends_at_header: !headers.is_empty(),
        });
    }
    for (i, h) in headers.iter().enumerate() {
        let next_line = headers.get(i + 1).map_or(n_lines, |n| n.line_index);
        let s0 = layout.first_sentence_at_or_after_line(h.line_index);
        let s1 = if next_line == n_lines {
            n_sent
        } else {
            layout.first_sentence_at_or_after_line(next_line)
        };
        sections.push(Section {
            header: Some(h.clone()),
            lines: h.line_index..next_line,
            sentences: s0..s1,
            label: h.canonical_label,
            ends_at_header: i + 1 < headers.len(),
        });
    }
    sections
}

/// Header detection followed by segmentation.
pub fn section_note(text: &str, layout: &NoteLayout, rules: &HeaderRules) -> Vec<Section> {
    segment_and_label(layout, &detect_headers(text, layout, rules))
}

/// Index of the section containing each sentence.
pub fn sentence_sections(sections: &[Section], n_sentences: usize) -> Vec<usize> {
    let mut owner = vec![0; n_sentences];
    for (idx, s) in sections.iter().enumerate() {
        for slot in &mut owner[s.sentences.clone()] {
            *slot = idx;
        }
    }
    owner
}
