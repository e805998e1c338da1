//! Clinical note model, JSONL ingestion and corpus statistics.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"note_id":"n1","patient_id":"p1","note_type":"progress_note","note_category":"primary care","provider_type":"physician","text":"..."}
//! ```
//!
//! `note_id` and `text` are required. Missing metadata fields become the
//! literal `"unknown"` so that every global feature stays defined.

mod stats;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::read_to_string;

pub use stats::{compute_stats, ratio, CorpusStats, NoteSections, StatsRatios};
pub use synth::{generate_synthetic, NoteTemplate, SynthConfig, SyntheticCorpus, TemplateMix};

pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalNote {
    pub note_id: String,
    pub patient_id: String,
    pub note_type: String,
    pub note_category: String,
    pub provider_type: String,
    pub text: String,
}

impl ClinicalNote {
    /// Builds a note with all metadata set to `"unknown"`.
    pub fn new(note_id: impl Into<String>, text: impl Into<String>) -> Self {
        ClinicalNote {
            note_id: note_id.into(),
            patient_id: UNKNOWN.to_string(),
            note_type: UNKNOWN.to_string(),
            note_category: UNKNOWN.to_string(),
            provider_type: UNKNOWN.to_string(),
            text: text.into(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoteRecord {
    note_id: Option<String>,
    patient_id: Option<String>,
    note_type: Option<String>,
    note_category: Option<String>,
    provider_type: Option<String>,
    text: Option<String>,
}

fn or_unknown(value: Option<String>) -> String {
    match value {
        Some(v) if !v.trim().is_empty() => v,
        _ => UNKNOWN.to_string(),
    }
}

/// Reads a JSONL corpus. Notes come back in file order; blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ClinicalNote>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string())
}

pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<ClinicalNote>> {
    let mut notes = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: NoteRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(source, lineno, format!("malformed record: {e}")))?;
        let note_id = match record.note_id {
            Some(id) if !id.trim().is_empty() => id,
            _ => return Err(Error::parse(source, lineno, "record is missing note_id")),
        };
        let text = match record.text {
            Some(t) if !t.trim().is_empty() => t,
            _ => return Err(Error::parse(source, lineno, format!("note {note_id:?} has no text"))),
        };
        if !seen.insert(note_id.clone()) {
            return Err(Error::DuplicateNoteId(note_id));
        }
        notes.push(ClinicalNote {
            note_id,
            patient_id: or_unknown(record.patient_id),
            note_type: or_unknown(record.note_type),
            note_category: or_unknown(record.note_category),
            provider_type: or_unknown(record.provider_type),
            text,
        });
    }
    Ok(notes)
}

pub fn write_corpus<W: Write>(notes: &[ClinicalNote], mut out: W) -> Result<()> {
    for note in notes {
        serde_json::to_writer(&mut out, note)?;
        out.write_all(b"\n").map_err(|e| Error::io("<corpus>", e))?;
    }
    Ok(())
}

pub fn corpus_to_string(notes: &[ClinicalNote]) -> String {
    let mut buf = Vec::new();
    write_corpus(notes, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceLabel {
    Plan,
    Nonplan,
}

impl SentenceLabel {
    pub fn is_plan(self) -> bool {
        self == SentenceLabel::Plan
    }

    pub fn from_bool(plan: bool) -> Self {
        if plan {
            SentenceLabel::Plan
        } else {
            SentenceLabel::Nonplan
        }
    }
}

impl fmt::Display for SentenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentenceLabel::Plan => "plan",
            SentenceLabel::Nonplan => "nonplan",
        })
    }
}

/// One labeled sentence span of the ground truth. Offsets are byte offsets
/// into the note text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthSpan {
    pub note_id: String,
    pub start: usize,
    pub end: usize,
    pub label: SentenceLabel,
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthSpan>> {
    let path = path.as_ref();
    parse_ground_truth(&read_to_string(path)?, &path.display().to_string())
}

/// One JSON span per line; blank lines are skipped.
pub fn parse_ground_truth(text: &str, source: &str) -> Result<Vec<GroundTruthSpan>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::parse(source, i + 1, format!("malformed span: {e}")))
        })
        .collect()
}

pub fn ground_truth_to_string(spans: &[GroundTruthSpan]) -> String {
    let mut out = String::new();
    for span in spans {
        out.push_str(&serde_json::to_string(span).expect("span serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_records_load_in_order() {
        let text = r#"{"note_id":"a","patient_id":"p","note_type":"progress_note","note_category":"primary care","provider_type":"physician","text":"Feeling fine."}
{"note_id":"b","text":"Plan: Lipid panel"}
"#;
        let notes = parse_corpus(text, "mem").unwrap();
        assert_eq!(notes.len(), 2);
        assert_eq!(notes[0].note_id, "a");
        assert_eq!(notes[1].note_id, "b");
        assert_eq!(notes[1].provider_type, UNKNOWN);
        assert_eq!(notes[1].note_type, UNKNOWN);
    }

    #[test]
    fn missing_note_id_names_line() {
        let text = "{\"note_id\":\"a\",\"text\":\"x\"}\n{\"text\":\"y\"}\n";
        match parse_corpus(text, "mem") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("note_id"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_and_duplicates_are_rejected() {
        assert!(matches!(
            parse_corpus("{\"note_id\":\"a\",", "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
        let dup = "{\"note_id\":\"a\",\"text\":\"x\"}\n{\"note_id\":\"a\",\"text\":\"y\"}\n";
        assert!(matches!(
            parse_corpus(dup, "mem"),
            Err(Error::DuplicateNoteId(id)) if id == "a"
        ));
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(parse_corpus("{\"note_id\":\"a\",\"text\":\"  \"}", "mem").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus("/nonexistent/corpus.jsonl"),
            Err(Error::Io { .. })
        ));
    }
}
