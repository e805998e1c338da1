//! Heading-triggered plan extraction and noisy dataset construction.
//!
//! Inside every secAP section, a line that opens with a plan heading (`P:`,
//! `Plan:`, `Recommendations -`) starts a plan section. The section runs until
//! the first blank line, numbered disease heading, new heading, end of an
//! enumerated list, or end of the enclosing section. Its sentences become
//! positive examples; an equal number of negatives is sampled from every
//! sentence not inside a plan section.

use std::collections::HashSet;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{compute_stats, ClinicalNote, CorpusStats, NoteSections, SentenceLabel};
use crate::error::{Error, Result};
use crate::sectioning::{section_note, sentence_sections, HeaderRules, Section, SectionLabel};
use crate::textproc::{list_marker_len, strip_list_marker, NoteLayout, SentenceSpan};
use crate::util::{read_to_string, sha256_hex, table_lines};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingEntry {
    /// Lowercase surface form.
    pub form: String,
    /// Short forms such as `p`.
    pub abbreviation: bool,
}

#[derive(Debug, Clone)]
pub struct HeadingLexicon {
    entries: Vec<HeadingEntry>,
    pattern: Regex,
}

impl Default for HeadingLexicon {
    fn default() -> Self {
        HeadingLexicon::parse(include_str!("../data/plan_headings.txt"), "plan_headings.txt")
            .expect("built-in heading lexicon is valid")
    }
}

impl HeadingLexicon {
    /// One heading per line; `#` comments and blank lines are ignored and
    /// duplicates (after lowercasing) are dropped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (lineno, line) in table_lines(text) {
            let form = line.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            if form.contains([':', '\t']) {
                return Err(Error::parse(source, lineno, "heading must not contain ':' or tabs"));
            }
            if seen.insert(form.clone()) {
                entries.push(HeadingEntry {
                    abbreviation: form.chars().count() <= 2,
                    form,
                });
            }
        }
        if entries.is_empty() {
            return Err(Error::Config(format!("{source}: heading lexicon is empty")));
        }
        let mut forms: Vec<&str> = entries.iter().map(|e| e.form.as_str()).collect();
        forms.sort_by_key(|f| std::cmp::Reverse(f.len()));
        let alternation = forms
            .iter()
            .map(|f| regex::escape(f).replace(' ', r"\s+"))
            .collect::<Vec<_>>()
            .join("|");
        let pattern = Regex::new(&format!(
            r"(?i)^\s*(?:\d{{1,2}}[.)]\s+)?({alternation})\s*(?::|[-–—](?:\s|$))\s*"
        ))
        .map_err(|e| Error::Config(format!("{source}: {e}")))?;
        Ok(HeadingLexicon { entries, pattern })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        HeadingLexicon::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn entries(&self) -> &[HeadingEntry] {
        &self.entries
    }

    pub fn contains(&self, form: &str) -> bool {
        let form = form.to_lowercase();
        self.entries.iter().any(|e| e.form == form)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingMatch {
    /// Lexicon form that matched, lowercase.
    pub entry: String,
    /// Heading as written in the note.
    pub surface: String,
    /// Byte range of the heading word(s) within the line.
    pub span: Range<usize>,
    /// Byte offset within the line where the heading's content starts.
    pub content_offset: usize,
}

pub fn detect_plan_heading(line: &str, lexicon: &HeadingLexicon) -> Option<HeadingMatch> {
    let caps = lexicon.pattern.captures(line)?;
    let word = caps.get(1)?;
    Some(HeadingMatch {
        entry: word
            .as_str()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase(),
        surface: word.as_str().to_string(),
        span: word.range(),
        content_offset: caps.get(0)?.end(),
    })
}

static DISEASE_HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*\d{1,2}[.)]\s+[A-Z][A-Za-z0-9/'&]*(?:\s+[A-Za-z0-9/'&]+){0,3}\s*(?:[-–—:](?:\s|$))").unwrap()
});

/// A numbered disease item such as `2. Smoking – talked to patient`.
pub fn is_disease_heading(line: &str) -> bool {
    DISEASE_HEADING.is_match(line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BlankLine,
    NewDiseaseHeading,
    NewSection,
    EndOfList,
    EndOfNote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSection {
    pub heading_line: usize,
    pub heading: HeadingMatch,
    /// Byte offset in the note where plan content starts.
    pub content_start: usize,
    /// Lines from the heading line through the last included line.
    pub lines: Range<usize>,
    /// Sentence indices; may include header-prefix spans, which are never positives.
    pub sentences: Range<usize>,
    pub parent_section: usize,
    pub stop_reason: StopReason,
}

impl PlanSection {
    /// Body sentence indices, header-prefix spans removed.
    pub fn body_sentences<'a>(&'a self, layout: &'a NoteLayout) -> impl Iterator<Item = usize> + 'a {
        self.sentences.clone().filter(|&i| !layout.sentences[i].is_header)
    }
}

/// Scopes one plan section starting at `heading_line`. Returns `None` when the
/// heading has no content before its stop condition.
pub fn scope_plan_section(
    text: &str,
    layout: &NoteLayout,
    sections: &[Section],
    parent_section: usize,
    heading_line: usize,
    heading: &HeadingMatch,
    lexicon: &HeadingLexicon,
) -> Result<Option<PlanSection>> {
    let section = sections
        .get(parent_section)
        .ok_or_else(|| Error::Contract(format!("no section {parent_section}")))?;
    if section.label != SectionLabel::SecAp {
        return Err(Error::Contract(format!(
            "plan heading on line {heading_line} lies in a {} section",
            section.label
        )));
    }
    if !section.lines.contains(&heading_line) {
        return Err(Error::Contract(format!(
            "plan heading on line {heading_line} lies outside section lines {:?}",
            section.lines
        )));
    }
    let line = layout.lines[heading_line];
    let content_start = line.start + heading.content_offset;
    let has_inline_content = !text[content_start.min(line.end)..line.end].trim().is_empty();
    let list_formatted = if has_inline_content {
        list_marker_len(text[content_start..line.end].trim_start()).is_some()
    } else {
        layout
            .lines
            .get(heading_line + 1)
            .is_some_and(|next| heading_line + 1 < section.lines.end && next.list_item)
    };

    let mut last_line = has_inline_content.then_some(heading_line);
    let mut stop = None;
    for l in heading_line + 1..section.lines.end {
        let info = layout.lines[l];
        let lt = &text[info.start..info.end];
        if info.blank {
            stop = Some(StopReason::BlankLine);
        } else if is_disease_heading(lt) {
            stop = Some(StopReason::NewDiseaseHeading);
        } else if detect_plan_heading(lt, lexicon).is_some() {
            stop = Some(StopReason::NewSection);
        } else if list_formatted && !info.list_item && !info.indented {
            stop = Some(StopReason::EndOfList);
        }
        if stop.is_some() {
            break;
        }
        last_line = Some(l);
    }
    let stop_reason = stop.unwrap_or(if section.ends_at_header {
        StopReason::NewSection
    } else {
        StopReason::EndOfNote
    });
    let Some(last_line) = last_line else {
        return Ok(None);
    };
    let end = layout.lines[last_line].end;
    let inside = |s: &SentenceSpan| s.end > content_start && s.start < end;
    let mut members = section.sentences.clone().filter(|&i| inside(&layout.sentences[i]));
    let Some(first) = members.next() else {
        return Ok(None);
    };
    let last = members.next_back().unwrap_or(first);
    if (first..=last).all(|i| layout.sentences[i].is_header) {
        return Ok(None);
    }
    Ok(Some(PlanSection {
        heading_line,
        heading: heading.clone(),
        content_start,
        lines: heading_line..last_line + 1,
        sentences: first..last + 1,
        parent_section,
        stop_reason,
    }))
}

/// Result of running the extractor over one note.
#[derive(Debug, Clone)]
pub struct NoteExtraction {
    pub note_id: String,
    pub layout: NoteLayout,
    pub sections: Vec<Section>,
    pub plan_sections: Vec<PlanSection>,
}

impl NoteExtraction {
    /// Per-sentence flag: inside some plan section and not a header span.
    pub fn plan_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.layout.sentences.len()];
        for ps in &self.plan_sections {
            for i in ps.body_sentences(&self.layout) {
                mask[i] = true;
            }
        }
        mask
    }

    pub fn header_mask(&self) -> Vec<bool> {
        self.layout.sentences.iter().map(|s| s.is_header).collect()
    }

    /// Text of sentence `i` as used for examples: clipped to the plan
    /// content start when the sentence shares a line with its heading, list
    /// marker removed.
    pub fn sentence_text<'a>(&self, note_text: &'a str, i: usize) -> &'a str {
        let span = self.layout.sentences[i];
        let mut start = span.start;
        for ps in &self.plan_sections {
            if ps.sentences.contains(&i) && span.start < ps.content_start && ps.content_start < span.end {
                start = ps.content_start;
            }
        }
        strip_list_marker(note_text[start..span.end].trim())
    }
}

#[derive(Debug, Clone)]
pub struct Extractor {
    rules: HeaderRules,
    lexicon: HeadingLexicon,
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor::new(HeaderRules::default(), HeadingLexicon::default())
    }
}

impl Extractor {
    /// Plan headings are registered as subheadings so they never split a section.
    pub fn new(rules: HeaderRules, lexicon: HeadingLexicon) -> Self {
        let rules = rules.with_subheadings(lexicon.entries().iter().map(|e| e.form.clone()));
        Extractor { rules, lexicon }
    }

    pub fn lexicon(&self) -> &HeadingLexicon {
        &self.lexicon
    }

    pub fn rules(&self) -> &HeaderRules {
        &self.rules
    }

    /// Stable digest of the extractor configuration.
    pub fn config_hash(&self) -> String {
        let mut forms: Vec<&str> = self.lexicon.entries().iter().map(|e| e.form.as_str()).collect();
        forms.sort_unstable();
        let mut desc = forms.join("\n");
        desc.push('\u{1f}');
        desc.push_str(&self.rules.fingerprint());
        sha256_hex(desc.as_bytes())
    }

    pub fn extract_note(&self, note: &ClinicalNote) -> NoteExtraction {
        let text = note.text.as_str();
        let layout = NoteLayout::new(text);
        let sections = section_note(text, &layout, &self.rules);
        let mut plan_sections = Vec::new();
        for (idx, section) in sections.iter().enumerate() {
            if section.label != SectionLabel::SecAp {
                continue;
            }
            let mut line = section.lines.start;
            while line < section.lines.end {
                let lt = layout.line_text(text, line);
                let scoped = match detect_plan_heading(lt, &self.lexicon) {
                    Some(m) => scope_plan_section(text, &layout, &sections, idx, line, &m, &self.lexicon)
                        .expect("heading lies in a secAP section by construction"),
                    None => None,
                };
                match scoped {
                    Some(ps) => {
                        line = ps.lines.end;
                        plan_sections.push(ps);
                    }
                    None => line += 1,
                }
            }
        }
        NoteExtraction {
            note_id: note.note_id.clone(),
            layout,
            sections,
            plan_sections,
        }
    }

    /// Runs [`Extractor::extract_note`] on every note in parallel; output is in note order.
    pub fn extract_corpus(&self, notes: &[ClinicalNote]) -> Vec<NoteExtraction> {
        notes.par_iter().map(|n| self.extract_note(n)).collect()
    }

    pub fn build_dataset(&self, notes: &[ClinicalNote], seed: u64) -> Result<NoisyDataset> {
        let extractions = self.extract_corpus(notes);
        build_noisy_dataset(notes, &extractions, &self.config_hash(), seed)
    }
}

/// [`compute_stats`] over extractor output; `extractions` pairs with `notes` by id.
pub fn corpus_stats(notes: &[ClinicalNote], extractions: &[NoteExtraction]) -> Result<CorpusStats> {
    let masks: Vec<Vec<bool>> = extractions.iter().map(NoteExtraction::header_mask).collect();
    let per_note: Vec<NoteSections<'_>> = extractions
        .iter()
        .zip(&masks)
        .map(|(ex, mask)| NoteSections {
            note_id: &ex.note_id,
            sections: &ex.sections,
            plan_sections: &ex.plan_sections,
            header_sentences: mask,
        })
        .collect();
    compute_stats(notes, &per_note)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSentence {
    pub text: String,
    pub label: SentenceLabel,
    pub note_id: String,
    pub section_label: SectionLabel,
    pub note_type: String,
    pub note_category: String,
    pub provider_type: String,
}

impl LabeledSentence {
    pub fn is_plan(&self) -> bool {
        self.label.is_plan()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyDataset {
    pub examples: Vec<LabeledSentence>,
    pub provenance: Provenance,
}

impl NoisyDataset {
    pub fn n_positive(&self) -> usize {
        self.examples.iter().filter(|e| e.is_plan()).count()
    }

    pub fn n_negative(&self) -> usize {
        self.examples.len() - self.n_positive()
    }
}

/// Lowercase, whitespace-collapsed text without a leading list marker.
pub fn normalize_text(text: &str) -> String {
    strip_list_marker(text)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// One non-header sentence of a note with its example text and context.
pub fn sentence_examples(note: &ClinicalNote, ex: &NoteExtraction) -> Vec<(usize, LabeledSentence)> {
    let owner = sentence_sections(&ex.sections, ex.layout.sentences.len());
    let mask = ex.plan_mask();
    ex.layout
        .sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_header)
        .filter_map(|(i, _)| {
            let text = ex.sentence_text(&note.text, i);
            (!text.is_empty()).then(|| {
                (
                    i,
                    LabeledSentence {
                        text: text.to_string(),
                        label: SentenceLabel::from_bool(mask[i]),
                        note_id: note.note_id.clone(),
                        section_label: ex.sections[owner[i]].label,
                        note_type: note.note_type.clone(),
                        note_category: note.note_category.clone(),
                        provider_type: note.provider_type.clone(),
                    },
                )
            })
        })
        .collect()
}

/// Positives from plan sections, deduplicated, plus an equal-size seeded
/// uniform sample of the remaining sentences.
pub fn build_noisy_dataset(
    notes: &[ClinicalNote],
    extractions: &[NoteExtraction],
    config_hash: &str,
    seed: u64,
) -> Result<NoisyDataset> {
    if notes.len() != extractions.len() {
        return Err(Error::LengthMismatch {
            left: notes.len(),
            right: extractions.len(),
        });
    }
    let mut positives = Vec::new();
    let mut candidates = Vec::new();
    let mut seen = HashSet::new();
    for (note, ex) in notes.iter().zip(extractions) {
        if note.note_id != ex.note_id {
            return Err(Error::DanglingNote(ex.note_id.clone()));
        }
        for (_, s) in sentence_examples(note, ex) {
            if s.is_plan() {
                if seen.insert(normalize_text(&s.text)) {
                    positives.push(s);
                }
            } else {
                candidates.push(s);
            }
        }
    }
    let provenance = Provenance {
        config_hash: config_hash.to_string(),
        seed,
    };
    if positives.is_empty() {
        log::warn!("no plan headings found; dataset is empty");
        return Ok(NoisyDataset {
            examples: Vec::new(),
            provenance,
        });
    }
    let mut eligible: Vec<(usize, LabeledSentence)> = candidates
        .into_iter()
        .filter(|s| seen.insert(normalize_text(&s.text)))
        .enumerate()
        .collect();
    if eligible.len() < positives.len() {
        log::warn!(
            "only {} eligible negatives for {} positives; dataset is unbalanced",
            eligible.len(),
            positives.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(positives.len());
    eligible.sort_by_key(|(order, _)| *order);
    let mut examples = positives;
    examples.extend(eligible.into_iter().map(|(_, s)| s));
    Ok(NoisyDataset { examples, provenance })
}

pub fn write_dataset<W: Write>(examples: &[LabeledSentence], mut out: W) -> Result<()> {
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
    }
    Ok(())
}

pub fn dataset_to_string(examples: &[LabeledSentence]) -> String {
    let mut buf = Vec::new();
    write_dataset(examples, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn parse_dataset(text: &str, source: &str) -> Result<Vec<LabeledSentence>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(source, i + 1, e.to_string())))
        .collect()
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSentence>> {
    let path = path.as_ref();
    parse_dataset(&read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const HTN_NOTE: &str = include_str!("../tests/fixtures/hypertension_note.txt");

    #[test]
    fn heading_detection() {
        let lex = HeadingLexicon::default();
        let m = detect_plan_heading("P: 1. Check home BPs daily; report repeated BPs over 140/90", &lex).unwrap();
        assert_eq!((m.entry.as_str(), m.surface.as_str()), ("p", "P"));
        assert_eq!(m.content_offset, 3);
        let m = detect_plan_heading("Plan: Lipid panel", &lex).unwrap();
        assert_eq!(m.surface, "Plan");
        assert_eq!(&"Plan: Lipid panel"[m.content_offset..], "Lipid panel");
        assert!(detect_plan_heading("HPI: Feeling fine.", &lex).is_none());
        assert!(detect_plan_heading("Recommendations - rest", &lex).is_some());
        assert!(detect_plan_heading("3. Instructions: rest", &lex).is_some());
        assert!(detect_plan_heading("Planned surgery next week.", &lex).is_none());
        assert!(detect_plan_heading("P-wave is normal.", &lex).is_none());
    }

    #[test]
    fn disease_headings() {
        assert!(is_disease_heading("2. Smoking – talked to patient"));
        assert!(is_disease_heading("1. HTN - stable"));
        assert!(is_disease_heading("3. Atrial fibrillation: rate controlled"));
        assert!(!is_disease_heading(
            "2. Reinforced importance of taking meds consistently"
        ));
        assert!(!is_disease_heading("2. Follow-up in 3 months"));
    }

    #[test]
    fn hypertension_note_yields_two_plan_sections() {
        let note = ClinicalNote::new("htn", HTN_NOTE);
        let ex = Extractor::default().extract_note(&note);
        let secap: Vec<_> = ex.sections.iter().filter(|s| s.label == SectionLabel::SecAp).collect();
        assert_eq!(secap.len(), 1);
        assert_eq!(secap[0].header.as_ref().unwrap().raw, "ASSESSMENT");

        assert_eq!(ex.plan_sections.len(), 2);
        let reasons: Vec<_> = ex.plan_sections.iter().map(|p| p.stop_reason).collect();
        assert_eq!(reasons, vec![StopReason::NewDiseaseHeading, StopReason::EndOfNote]);
        let counts: Vec<usize> = ex
            .plan_sections
            .iter()
            .map(|p| p.body_sentences(&ex.layout).count())
            .collect();
        assert_eq!(counts, vec![4, 1]);

        let rows = sentence_examples(&note, &ex);
        let pos: Vec<&str> = rows
            .iter()
            .filter(|(_, s)| s.is_plan())
            .map(|(_, s)| s.text.as_str())
            .collect();
        assert_eq!(
            pos,
            vec![
                "Check home BPs daily; report repeated BPs over 140/90",
                "Reinforced importance of taking meds consistently",
                "May increase meds if home BPs consistently elevated when he is taking his meds regularly",
                "RTC 3 mo",
                "Lipid panel",
            ]
        );
        assert!(rows
            .iter()
            .all(|(_, s)| !s.is_plan() || s.section_label == SectionLabel::SecAp));
    }

    #[test]
    fn blank_line_and_list_stops() {
        let text = "ASSESSMENT:\nPlan:\n\nStable.";
        let ex = Extractor::default().extract_note(&ClinicalNote::new("a", text));
        assert!(ex.plan_sections.is_empty(), "empty scope is dropped");

        let text = "ASSESSMENT:\nPlan:\n- Start aspirin.\n- Check LDL.\nDoing well overall.";
        let ex = Extractor::default().extract_note(&ClinicalNote::new("b", text));
        assert_eq!(ex.plan_sections.len(), 1);
        assert_eq!(ex.plan_sections[0].stop_reason, StopReason::EndOfList);
        assert_eq!(ex.plan_sections[0].sentences.len(), 2);

        let text = "ASSESSMENT:\nPlan: Start aspirin.\n\nDoing well.";
        let ex = Extractor::default().extract_note(&ClinicalNote::new("c", text));
        assert_eq!(ex.plan_sections[0].stop_reason, StopReason::BlankLine);

        let text = "ASSESSMENT:\nPlan: Start aspirin.\nMEDICATIONS:\nAspirin 81 mg";
        let ex = Extractor::default().extract_note(&ClinicalNote::new("d", text));
        assert_eq!(ex.plan_sections[0].stop_reason, StopReason::NewSection);
    }

    #[test]
    fn heading_outside_secap_is_contract_error() {
        let text = "HPI: Doing well.\nPlan: rest.";
        let layout = NoteLayout::new(text);
        let rules = Extractor::default().rules().clone();
        let sections = section_note(text, &layout, &rules);
        let lex = HeadingLexicon::default();
        let m = detect_plan_heading("Plan: rest.", &lex).unwrap();
        let err = scope_plan_section(text, &layout, &sections, 0, 1, &m, &lex).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn plan_headings_outside_secap_are_ignored() {
        let text = "HPI: Doing well.\nPlan: rest.";
        let ex = Extractor::default().extract_note(&ClinicalNote::new("x", text));
        assert!(ex.plan_sections.is_empty());
    }

    #[test]
    fn dataset_is_balanced_deduplicated_and_deterministic() {
        let mut notes = vec![ClinicalNote::new("htn", HTN_NOTE)];
        notes.push(ClinicalNote::new(
            "dup",
            "ASSESSMENT:\nPlan: Lipid panel\n\nFeeling fine.",
        ));
        let ex = Extractor::default();
        let a = ex.build_dataset(&notes, 5).unwrap();
        let b = ex.build_dataset(&notes, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_positive(), 5);
        assert_eq!(a.n_negative(), 5);
        let norm: HashSet<String> = a.examples.iter().map(|e| normalize_text(&e.text)).collect();
        assert_eq!(norm.len(), a.examples.len());
    }

    #[test]
    fn no_headings_gives_empty_dataset() {
        let notes = vec![ClinicalNote::new(
            "n",
            "ASSESSMENT:\n1. HTN – stable. Continue lisinopril.",
        )];
        let ds = Extractor::default().build_dataset(&notes, 1).unwrap();
        assert!(ds.examples.is_empty());
    }

    #[test]
    fn lexicon_validation() {
        assert!(HeadingLexicon::parse("# nothing\n\n", "x").is_err());
        let lex = HeadingLexicon::parse("Plan\nplan\nP\n", "x").unwrap();
        assert_eq!(lex.entries().len(), 2);
        assert!(lex.entries()[1].abbreviation);
    }

    #[test]
    fn dataset_round_trip() {
        let ds = Extractor::default()
            .build_dataset(&[ClinicalNote::new("htn", HTN_NOTE)], 1)
            .unwrap();
        let s = dataset_to_string(&ds.examples);
        assert_eq!(parse_dataset(&s, "mem").unwrap(), ds.examples);
        let first = s.lines().next().unwrap();
        for key in [
            "text",
            "label",
            "note_id",
            "section_label",
            "note_type",
            "note_category",
            "provider_type",
        ] {
            assert!(first.contains(&format!("\"{key}\"")));
        }
    }
}
