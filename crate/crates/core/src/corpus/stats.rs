use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::ClinicalNote;
use crate::error::{Error, Result};
use crate::plan_extract::PlanSection;
use crate::sectioning::{Section, SectionLabel};

/// Corpus-level counts of secAP sections and headed plan sections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub notes_total: usize,
    pub notes_with_secap: usize,
    pub notes_with_plan_headings: usize,
    pub secap_sections: usize,
    pub secap_with_plan_headings: usize,
    pub plan_sentences: usize,
    /// Sentences (header spans excluded) inside secAP sections that carry a plan heading.
    pub sentences_in_headed_secap: usize,
    pub ratios: StatsRatios,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRatios {
    pub secap_notes_of_total: f64,
    pub plan_headed_notes_of_secap: f64,
    pub plan_headed_secap_of_secap: f64,
    pub plan_sentences_of_headed_secap: f64,
}

/// `child / parent`, with 0 for an empty parent.
pub fn ratio(child: usize, parent: usize) -> f64 {
    if parent == 0 {
        0.0
    } else {
        child as f64 / parent as f64
    }
}

/// Section-bearing input for [`compute_stats`]: a note id and its sections.
pub struct NoteSections<'a> {
    pub note_id: &'a str,
    pub sections: &'a [Section],
    pub plan_sections: &'a [PlanSection],
    /// Per-sentence header flag, used to count body sentences.
    pub header_sentences: &'a [bool],
}

pub fn compute_stats(notes: &[ClinicalNote], per_note: &[NoteSections<'_>]) -> Result<CorpusStats> {
    let ids: HashSet<&str> = notes.iter().map(|n| n.note_id.as_str()).collect();
    let mut stats = CorpusStats {
        notes_total: notes.len(),
        ..CorpusStats::default()
    };
    let mut secap_notes = BTreeSet::new();
    let mut headed_notes = BTreeSet::new();
    for entry in per_note {
        if !ids.contains(entry.note_id) {
            return Err(Error::DanglingNote(entry.note_id.to_string()));
        }
        let headed: BTreeSet<usize> = entry.plan_sections.iter().map(|p| p.parent_section).collect();
        for (idx, section) in entry.sections.iter().enumerate() {
            if section.label != SectionLabel::SecAp {
                continue;
            }
            stats.secap_sections += 1;
            secap_notes.insert(entry.note_id);
            if headed.contains(&idx) {
                stats.secap_with_plan_headings += 1;
                headed_notes.insert(entry.note_id);
                stats.sentences_in_headed_secap += section
                    .sentences
                    .clone()
                    .filter(|&i| !entry.header_sentences.get(i).copied().unwrap_or(false))
                    .count();
            }
        }
        if let Some(p) = entry
            .plan_sections
            .iter()
            .find(|p| entry.sections.get(p.parent_section).is_none())
        {
            return Err(Error::Contract(format!(
                "plan section in note {} refers to missing section {}",
                entry.note_id, p.parent_section
            )));
        }
        stats.plan_sentences += entry
            .plan_sections
            .iter()
            .map(|p| {
                p.sentences
                    .clone()
                    .filter(|&i| !entry.header_sentences.get(i).copied().unwrap_or(false))
                    .count()
            })
            .sum::<usize>();
    }
    stats.notes_with_secap = secap_notes.len();
    stats.notes_with_plan_headings = headed_notes.len();
    stats.ratios = StatsRatios {
        secap_notes_of_total: ratio(stats.notes_with_secap, stats.notes_total),
        plan_headed_notes_of_secap: ratio(stats.notes_with_plan_headings, stats.notes_with_secap),
        plan_headed_secap_of_secap: ratio(stats.secap_with_plan_headings, stats.secap_sections),
        plan_sentences_of_headed_secap: ratio(stats.plan_sentences, stats.sentences_in_headed_secap),
    };
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_is_all_zero() {
        let s = compute_stats(&[], &[]).unwrap();
        assert_eq!(s, CorpusStats::default());
    }

    #[test]
    fn ratio_of_large_counts() {
        assert!((ratio(6231, 46402) - 0.134).abs() < 5e-4);
        assert_eq!(ratio(3, 0), 0.0);
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let notes = vec![ClinicalNote::new("a", "x")];
        let entry = NoteSections {
            note_id: "b",
            sections: &[],
            plan_sections: &[],
            header_sentences: &[],
        };
        assert!(matches!(compute_stats(&notes, &[entry]), Err(Error::DanglingNote(id)) if id == "b"));
    }
}
