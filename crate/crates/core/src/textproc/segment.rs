//! Line and sentence segmentation.
//!
//! Sentences never cross a line break. On every line a colon-terminated header
//! prefix (`HPI:`, `P:`) is split off into its own span, then an enumerated
//! list marker (`1.`, `-`, `*`) opens a list-item span, and the rest is split
//! on `.`, `!` and `?` followed by whitespace and a capital letter or digit.
//! Single-letter initials and a short abbreviation list do not end a sentence,
//! and `;` never does.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    /// Byte offset of the first non-whitespace character.
    pub start: usize,
    /// Byte offset one past the last non-whitespace character.
    pub end: usize,
    pub line_index: usize,
    pub is_list_item: bool,
    /// The span is a `Word:` header prefix split off the start of a line.
    pub is_header: bool,
}

impl SentenceSpan {
    pub fn text<'a>(&self, note_text: &'a str) -> &'a str {
        &note_text[self.start..self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineInfo {
    pub start: usize,
    /// Excludes the line terminator.
    pub end: usize,
    pub blank: bool,
    pub list_item: bool,
    /// Non-blank and starting with whitespace.
    pub indented: bool,
}

/// Lines and sentences of one note.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteLayout {
    pub lines: Vec<LineInfo>,
    pub sentences: Vec<SentenceSpan>,
}

impl NoteLayout {
    pub fn new(text: &str) -> Self {
        NoteLayout {
            lines: split_lines(text),
            sentences: segment_sentences(text),
        }
    }

    pub fn line_text<'a>(&self, text: &'a str, line: usize) -> &'a str {
        let info = &self.lines[line];
        &text[info.start..info.end]
    }

    /// Index of the first sentence that starts on or after `line`.
    pub fn first_sentence_at_or_after_line(&self, line: usize) -> usize {
        self.sentences.partition_point(|s| s.line_index < line)
    }
}

static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:\d{1,2}[.)]|[-*•])\s+").unwrap());

static HEADER_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z][A-Za-z0-9/&'()\-]*(?: [A-Za-z0-9/&'()\-]+){0,4}) ?:(?:\s|$)").unwrap());

const MAX_HEADER_PREFIX: usize = 40;

const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "vs", "etc", "approx", "e.g", "i.e", "jr", "sr",
];

/// Length in bytes of a leading list marker plus its trailing whitespace.
pub fn list_marker_len(s: &str) -> Option<usize> {
    LIST_MARKER.find(s).map(|m| m.end())
}

/// Drops a leading list marker (`"1. Check"` becomes `"Check"`).
pub fn strip_list_marker(s: &str) -> &str {
    let trimmed = s.trim_start();
    match list_marker_len(trimmed) {
        Some(n) => trimmed[n..].trim_start(),
        None => trimmed,
    }
}

/// For a line (already left-trimmed) beginning with a `Header:` prefix,
/// returns the byte length of the prefix including the colon.
pub fn header_prefix_len(line: &str) -> Option<usize> {
    if list_marker_len(line).is_some() {
        return None;
    }
    let caps = HEADER_PREFIX.captures(line)?;
    let prefix = caps.get(1)?;
    if prefix.as_str().len() > MAX_HEADER_PREFIX {
        return None;
    }
    let colon = line[prefix.end()..].find(':')? + prefix.end();
    Some(colon + 1)
}

pub fn split_lines(text: &str) -> Vec<LineInfo> {
    let mut lines = Vec::new();
    let mut start = 0;
    for raw in text.split_inclusive('\n') {
        let content = raw.trim_end_matches('\n').trim_end_matches('\r');
        let end = start + content.len();
        let trimmed = content.trim_start();
        let blank = trimmed.is_empty();
        lines.push(LineInfo {
            start,
            end,
            blank,
            list_item: !blank && list_marker_len(trimmed).is_some(),
            indented: !blank && content.starts_with(char::is_whitespace),
        });
        start += raw.len();
    }
    lines
}

pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    for (line_index, line) in split_lines(text).iter().enumerate() {
        if line.blank {
            continue;
        }
        let content = &text[line.start..line.end];
        let lead = content.len() - content.trim_start().len();
        let mut pos = line.start + lead;
        let end = line.start + content.trim_end().len();

        if let Some(n) = header_prefix_len(&text[pos..end]) {
            spans.push(SentenceSpan {
                start: pos,
                end: pos + n,
                line_index,
                is_list_item: false,
                is_header: true,
            });
            pos = skip_ws(text, pos + n, end);
            if pos >= end {
                continue;
            }
        }

        let is_list_item = list_marker_len(&text[pos..end]).is_some();
        let body_start = match list_marker_len(&text[pos..end]) {
            Some(n) => pos + n,
            None => pos,
        };
        let mut first = true;
        for (s, e) in split_sentences(text, body_start, end) {
            spans.push(SentenceSpan {
                // The list marker belongs to the item's first sentence.
                start: if first { pos } else { s },
                end: e,
                line_index,
                is_list_item: is_list_item && first,
                is_header: false,
            });
            first = false;
        }
        if first && is_list_item {
            // A bare marker with nothing after it.
            spans.push(SentenceSpan {
                start: pos,
                end,
                line_index,
                is_list_item: true,
                is_header: false,
            });
        }
    }
    spans
}

fn skip_ws(text: &str, mut pos: usize, end: usize) -> usize {
    while pos < end {
        let c = text[pos..].chars().next().unwrap();
        if !c.is_whitespace() {
            break;
        }
        pos += c.len_utf8();
    }
    pos
}

fn split_sentences(text: &str, start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut cur = skip_ws(text, start, end);
    let bytes_end = end;
    let mut i = cur;
    while i < bytes_end {
        let c = text[i..].chars().next().unwrap();
        let clen = c.len_utf8();
        if matches!(c, '.' | '!' | '?') {
            let mut after = i + clen;
            while after < bytes_end {
                let n = text[after..].chars().next().unwrap();
                if matches!(n, '.' | '!' | '?' | '"' | ')' | '\'') {
                    after += n.len_utf8();
                } else {
                    break;
                }
            }
            if after >= bytes_end {
                break;
            }
            let next_char = text[after..].chars().next().unwrap();
            if next_char.is_whitespace() {
                let next = skip_ws(text, after, bytes_end);
                if next >= bytes_end {
                    break;
                }
                let starter = text[next..].chars().next().unwrap();
                let opens = starter.is_uppercase() || starter.is_ascii_digit() || starter == '(' || starter == '"';
                if opens && !(c == '.' && is_abbreviation(&text[cur..i])) {
                    out.push((cur, after));
                    cur = next;
                    i = next;
                    continue;
                }
            }
            i = after;
            continue;
        }
        i += clen;
    }
    if cur < bytes_end {
        let trimmed_end = cur + text[cur..bytes_end].trim_end().len();
        if trimmed_end > cur {
            out.push((cur, trimmed_end));
        }
    }
    out
}

/// Whether the word right before a period is an initial or a known abbreviation.
fn is_abbreviation(before: &str) -> bool {
    let word_start = before
        .char_indices()
        .rev()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '.'))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = &before[word_start..];
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        return c.is_alphabetic();
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}
