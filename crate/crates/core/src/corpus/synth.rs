//! Seeded generator of clinic-style notes with known plan sentences.
//!
//! Notes follow the shape of a primary-care visit: metadata lines, history,
//! medications, and an assessment section made of numbered disease items.
//! Plan sentences appear inside disease items without any heading, and in a
//! configurable fraction of notes also under a plan heading in one of several
//! layouts.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClinicalNote, GroundTruthSpan, SentenceLabel};
use crate::error::{Error, Result};
use crate::textproc::segment_sentences;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteTemplate {
    OfficeVisit,
    Progress,
    Discharge,
}

impl NoteTemplate {
    fn note_type(self) -> &'static str {
        match self {
            NoteTemplate::OfficeVisit => "office_visit",
            NoteTemplate::Progress => "progress",
            NoteTemplate::Discharge => "discharge",
        }
    }

    fn note_category(self) -> &'static str {
        match self {
            NoteTemplate::Discharge => "inpatient",
            _ => "outpatient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateMix {
    pub office_visit: f64,
    pub progress: f64,
    pub discharge: f64,
}

impl Default for TemplateMix {
    fn default() -> Self {
        TemplateMix {
            office_visit: 0.5,
            progress: 0.3,
            discharge: 0.2,
        }
    }
}

impl TemplateMix {
    fn pick(&self, rng: &mut impl Rng) -> NoteTemplate {
        let u: f64 = rng.gen::<f64>() * (self.office_visit + self.progress + self.discharge);
        if u < self.office_visit {
            NoteTemplate::OfficeVisit
        } else if u < self.office_visit + self.progress {
            NoteTemplate::Progress
        } else {
            NoteTemplate::Discharge
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_patients: usize,
    /// Inclusive `[min, max]` notes per patient.
    pub notes_per_patient: (usize, usize),
    /// Fraction of notes with an assessment section that also carry a headed plan section.
    pub plan_heading_rate: f64,
    /// Fraction of notes that have an assessment section at all.
    pub secap_rate: f64,
    /// Probability that a non-list headed block is followed, without a blank
    /// line, by a non-plan sentence that the extractor will sweep up.
    pub noise_rate: f64,
    pub seed: u64,
    pub template_mix: TemplateMix,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 100,
            notes_per_patient: (10, 10),
            plan_heading_rate: 0.13,
            secap_rate: 1.0,
            noise_rate: 0.1,
            seed: 42,
            template_mix: TemplateMix::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("plan_heading_rate", self.plan_heading_rate)?;
        unit("secap_rate", self.secap_rate)?;
        unit("noise_rate", self.noise_rate)?;
        let (lo, hi) = self.notes_per_patient;
        if lo > hi {
            return Err(Error::Config(format!("notes_per_patient min {lo} exceeds max {hi}")));
        }
        let m = &self.template_mix;
        let weights = [m.office_visit, m.progress, m.discharge];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("template weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("template weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub notes: Vec<ClinicalNote>,
    /// One span per segmented sentence of every note, in note then offset order.
    pub ground_truth: Vec<GroundTruthSpan>,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut notes = Vec::new();
    let mut ground_truth = Vec::new();
    for p in 0..cfg.n_patients {
        let patient = Patient::random(&mut rng, p);
        let count = rng.gen_range(cfg.notes_per_patient.0..=cfg.notes_per_patient.1);
        for _ in 0..count {
            let template = cfg.template_mix.pick(&mut rng);
            let with_secap = rng.gen_bool(cfg.secap_rate);
            let headed = with_secap && rng.gen_bool(cfg.plan_heading_rate);
            let built = build_note(&mut rng, template, &patient, with_secap, headed, cfg.noise_rate);
            let note_id = format!("N{:06}", notes.len() + 1);
            for span in segment_sentences(&built.text) {
                let is_plan = built
                    .plan_spans
                    .iter()
                    .any(|r| r.start < span.end && span.start < r.end);
                ground_truth.push(GroundTruthSpan {
                    note_id: note_id.clone(),
                    start: span.start,
                    end: span.end,
                    label: SentenceLabel::from_bool(is_plan),
                });
            }
            notes.push(ClinicalNote {
                note_id,
                patient_id: patient.id.clone(),
                note_type: template.note_type().to_string(),
                note_category: template.note_category().to_string(),
                provider_type: PROVIDERS.choose(&mut rng).unwrap().to_string(),
                text: built.text,
            });
        }
    }
    Ok(SyntheticCorpus { notes, ground_truth })
}

struct Patient {
    id: String,
    name: String,
    pcp: String,
    conditions: Vec<&'static str>,
}

impl Patient {
    fn random(rng: &mut impl Rng, index: usize) -> Patient {
        let first = FIRST_NAMES.choose(rng).unwrap();
        let last = LAST_NAMES.choose(rng).unwrap();
        let initial = (b'A' + rng.gen_range(0..26u8)) as char;
        let pcp = format!(
            "{} {}",
            FIRST_NAMES.choose(rng).unwrap(),
            LAST_NAMES.choose(rng).unwrap()
        );
        let n = rng.gen_range(2..=4);
        let conditions = CONDITIONS.choose_multiple(rng, n).copied().collect();
        Patient {
            id: format!("P{:05}", index + 1),
            name: format!("{first} {initial}. {last}"),
            pcp,
            conditions,
        }
    }
}

#[derive(Default)]
struct NoteBuilder {
    text: String,
    plan_spans: Vec<Range<usize>>,
}

impl NoteBuilder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
    }

    fn line(&mut self, s: &str) {
        self.text.push_str(s);
        self.text.push('\n');
    }

    fn plan(&mut self, s: &str) {
        let start = self.text.len();
        self.text.push_str(s);
        self.plan_spans.push(start..self.text.len());
    }
}

#[derive(Clone, Copy)]
enum BlockLayout {
    InlineList,
    NextLineList,
    DashList,
    InlineSentences,
    DashHeading,
}

const LAYOUTS: [BlockLayout; 5] = [
    BlockLayout::InlineList,
    BlockLayout::NextLineList,
    BlockLayout::DashList,
    BlockLayout::InlineSentences,
    BlockLayout::DashHeading,
];

fn build_note(
    rng: &mut ChaCha8Rng,
    template: NoteTemplate,
    patient: &Patient,
    with_secap: bool,
    headed: bool,
    noise_rate: f64,
) -> NoteBuilder {
    let mut b = NoteBuilder::default();
    let date = format!(
        "{} {}, {}",
        MONTHS.choose(rng).unwrap(),
        rng.gen_range(1..=28),
        rng.gen_range(2009..=2016)
    );
    match template {
        NoteTemplate::OfficeVisit => {
            b.line(&format!("OFFICE VISIT: {date}"));
            b.line(&format!("Name: {}", patient.name));
            b.line("");
            b.line(&format!("PCP: {}, MD", patient.pcp));
            b.line("");
            b.line(&format!("HPI: {}", sentences(rng, NONPLAN, 2..=4)));
            b.line("");
            b.line("MEDICATIONS:");
            med_lines(rng, &mut b);
        }
        NoteTemplate::Progress => {
            b.line("PROGRESS NOTE");
            b.line("");
            b.line(&format!("SUBJECTIVE: {}", sentences(rng, NONPLAN, 2..=3)));
            b.line("");
            b.line(&format!(
                "VITALS: BP {}/{}, HR {}",
                rng.gen_range(110..=165),
                rng.gen_range(65..=100),
                rng.gen_range(55..=100)
            ));
            b.line("");
            b.line("PHYSICAL EXAM:");
            for _ in 0..rng.gen_range(2..=3) {
                b.line(&fill_from(rng, EXAM));
            }
        }
        NoteTemplate::Discharge => {
            b.line("DISCHARGE SUMMARY");
            b.line(&format!("Admission Date: {date}"));
            b.line("");
            b.line(&format!("HOSPITAL COURSE: {}", sentences(rng, NONPLAN, 3..=4)));
            b.line("");
            b.line("DISCHARGE MEDICATIONS:");
            med_lines(rng, &mut b);
        }
    }
    if !with_secap {
        return b;
    }
    b.line("");
    b.line(SECAP_HEADERS.choose(rng).unwrap());
    b.line("");

    let items = patient.conditions.len();
    let mut headed_after = vec![false; items];
    if headed {
        headed_after[rng.gen_range(0..items)] = true;
        if items > 1 && rng.gen_bool(0.5) {
            headed_after[rng.gen_range(0..items)] = true;
        }
    }
    for (i, condition) in patient.conditions.iter().enumerate() {
        let dash = if rng.gen_bool(0.7) { "–" } else { "-" };
        b.push(&format!("{}. {condition} {dash} ", i + 1));
        b.push(&fill_from(rng, NONPLAN));
        let extra_nonplan = rng.gen_range(0..=2);
        for _ in 0..extra_nonplan {
            b.push(" ");
            b.push(&fill_from(rng, NONPLAN));
        }
        let unheaded = [0usize, 0, 1, 1, 2].choose(rng).copied().unwrap();
        for _ in 0..unheaded {
            b.push(" ");
            let s = fill_from(rng, PLAN);
            b.plan(&s);
        }
        b.push("\n");
        let last = i + 1 == items;
        if headed_after[i] {
            b.line("");
            // A blank line usually closes the block; otherwise the next disease item follows directly.
            let closes_with_blank = !last && rng.gen_bool(0.8);
            let noise = (closes_with_blank && rng.gen_bool(noise_rate)).then(|| fill_from(rng, NONPLAN));
            headed_block(rng, &mut b, noise);
            if closes_with_blank {
                b.line("");
            }
        } else if !last {
            b.line("");
        }
    }
    b
}

fn headed_block(rng: &mut ChaCha8Rng, b: &mut NoteBuilder, noise: Option<String>) {
    let heading = HEADINGS.choose(rng).unwrap();
    let layout = *LAYOUTS.choose(rng).unwrap();
    let n = rng.gen_range(6..=10);
    let items: Vec<String> = (0..n).map(|_| fill_from(rng, PLAN)).collect();
    match layout {
        BlockLayout::InlineList | BlockLayout::NextLineList => {
            if matches!(layout, BlockLayout::InlineList) {
                b.push(&format!("{heading}: "));
            } else {
                b.line(&format!("{heading}:"));
            }
            for (i, s) in items.iter().enumerate() {
                b.push(&format!("{}. ", i + 1));
                b.plan(s);
                b.push("\n");
            }
        }
        BlockLayout::DashList => {
            b.line(&format!("{heading}:"));
            for s in &items {
                b.push("- ");
                b.plan(s);
                b.push("\n");
            }
        }
        BlockLayout::InlineSentences | BlockLayout::DashHeading => {
            if matches!(layout, BlockLayout::InlineSentences) {
                b.push(&format!("{heading}: "));
            } else {
                b.push(&format!("{heading} - "));
            }
            for (i, s) in items.iter().enumerate() {
                if i > 0 {
                    b.push(" ");
                }
                b.plan(s);
            }
            b.push("\n");
            if let Some(extra) = noise {
                b.line(&extra);
            }
        }
    }
}

fn med_lines(rng: &mut ChaCha8Rng, b: &mut NoteBuilder) {
    for _ in 0..rng.gen_range(2..=4) {
        b.line(&capitalize(&fill(rng, "{drug} {dose} mg {freq}")));
    }
}

fn sentences(rng: &mut ChaCha8Rng, pool: &[&str], n: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.gen_range(n);
    (0..n).map(|_| fill_from(rng, pool)).collect::<Vec<_>>().join(" ")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn fill_from(rng: &mut ChaCha8Rng, pool: &[&str]) -> String {
    let template = pool.choose(rng).unwrap();
    fill(rng, template)
}

/// Expands `{slot}` placeholders and capitalizes the first letter.
fn fill(rng: &mut ChaCha8Rng, template: &str) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("unclosed slot in template");
        out.push_str(&slot(rng, &rest[open + 1..close]));
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    capitalize(&out)
}

fn slot(rng: &mut ChaCha8Rng, name: &str) -> String {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs.choose(rng).unwrap().to_string();
    match name {
        "drug" => pick(rng, DRUGS),
        "dose" => pick(rng, &["5", "10", "20", "25", "40", "50", "100", "250", "500", "1000"]),
        "freq" => pick(
            rng,
            &[
                "daily",
                "twice daily",
                "at bedtime",
                "every morning",
                "every other day",
                "three times daily",
            ],
        ),
        "lab" => pick(rng, LABS),
        "when" => pick(
            rng,
            &[
                "in 2 weeks",
                "in 3 months",
                "at the next visit",
                "before the next visit",
                "in 6 weeks",
                "in one month",
                "in 6 months",
                "prior to follow up",
                "next week",
                "this month",
            ],
        ),
        "n" => rng.gen_range(2..=12).to_string(),
        "unit" => pick(rng, &["weeks", "months"]),
        "specialty" => pick(
            rng,
            &[
                "cardiology",
                "endocrinology",
                "nephrology",
                "dermatology",
                "physical therapy",
                "podiatry",
                "ophthalmology",
                "pulmonology",
                "neurology",
                "gastroenterology",
                "nutrition",
                "sleep medicine",
            ],
        ),
        "reason" => pick(
            rng,
            &[
                "further evaluation",
                "management",
                "a second opinion",
                "consultation",
                "an annual exam",
            ],
        ),
        "procedure" => pick(
            rng,
            &[
                "colonoscopy",
                "echocardiogram",
                "stress test",
                "chest x-ray",
                "mammogram",
                "sleep study",
                "ultrasound of the abdomen",
                "MRI of the lumbar spine",
                "bone density scan",
                "EKG",
            ],
        ),
        "lifestyle" => pick(
            rng,
            &[
                "a low salt diet",
                "regular exercise",
                "weight loss",
                "smoking cessation",
                "limiting alcohol",
                "a diabetic diet",
                "daily walking",
            ],
        ),
        "program" => pick(
            rng,
            &[
                "smoking cessation class",
                "diabetes education class",
                "cardiac rehab",
                "weight management program",
            ],
        ),
        "symptom" => pick(rng, SYMPTOMS),
        "vital" => pick(rng, &["blood pressure", "blood sugar", "weight", "heart rate"]),
        "vaccine" => pick(
            rng,
            &[
                "flu vaccine",
                "pneumonia vaccine",
                "tetanus booster",
                "shingles vaccine",
            ],
        ),
        "condition" => pick(
            rng,
            &[
                "hypertension",
                "diabetes",
                "hyperlipidemia",
                "asthma",
                "reflux",
                "depression",
                "anemia",
                "insomnia",
                "arthritis",
                "kidney disease",
            ],
        ),
        "past" => pick(
            rng,
            &[
                "last week",
                "in March",
                "two months ago",
                "at the last visit",
                "since January",
                "over the summer",
                "yesterday",
                "last year",
            ],
        ),
        "adverb" => pick(rng, &["well", "poorly", "fairly well", "reasonably well"]),
        "mood" => pick(rng, &["fine", "tired", "better", "well", "anxious", "more energetic"]),
        "finding" => pick(
            rng,
            &[
                "mild edema of both ankles",
                "clear lungs",
                "a soft systolic murmur",
                "normal gait",
                "tenderness over the lower back",
                "a healing abrasion",
                "decreased breath sounds",
            ],
        ),
        "activity" => pick(
            rng,
            &[
                "lifting boxes",
                "a long walk",
                "a cold",
                "a fall",
                "a busy week at work",
            ],
        ),
        "sys" => rng.gen_range(110..=165).to_string(),
        "dia" => rng.gen_range(65..=100).to_string(),
        "value" => rng.gen_range(5..=190).to_string(),
        "weight" => rng.gen_range(120..=260).to_string(),
        other => panic!("unknown template slot {other}"),
    }
}

static PLAN: &[&str] = &[
    "Start {drug} {dose} mg {freq}.",
    "Continue {drug} {dose} mg {freq}.",
    "Increase {drug} to {dose} mg {freq}.",
    "Decrease {drug} to {dose} mg {freq}.",
    "Stop {drug} and start {drug} {dose} mg {freq}.",
    "Will check {lab} {when}.",
    "Will order {procedure} {when}.",
    "Will repeat {lab} {when}.",
    "Check {lab} {when}.",
    "Check home BPs daily and report readings over {sys}/{dia}.",
    "Refer to {specialty} for {reason}.",
    "Schedule {procedure} {when}.",
    "Follow up in {n} {unit}.",
    "Return to clinic in {n} {unit}.",
    "RTC {n} mo.",
    "Recommend {lifestyle}.",
    "Encourage {lifestyle}.",
    "Enroll in {program}.",
    "Obtain {procedure} {when}.",
    "May increase {drug} if {symptom} persists.",
    "Call the office if {symptom} worsens.",
    "Patient will start taking {drug} {freq}.",
    "Patient will monitor {vital} at home {freq}.",
    "Hold {drug} until {lab} is repeated.",
    "Titrate {drug} to goal over the next {n} weeks.",
    "Give {vaccine} today.",
    "Will discuss {procedure} with {specialty} {when}.",
    "Send {lab} {when} and call with results.",
];

static NONPLAN: &[&str] = &[
    "Blood pressure has been {adverb} controlled {past}.",
    "Blood pressure was {sys}/{dia} today.",
    "Reports {symptom} for the past {n} days.",
    "Denies {symptom} or {symptom}.",
    "{lab} was {value} {past}.",
    "Admits to not taking {drug} consistently.",
    "Feeling {mood} overall.",
    "Running {sys}/{dia} at home.",
    "Exam shows {finding}.",
    "Was admitted with {symptom} and treated with {drug}.",
    "Symptoms improved over {n} days.",
    "Weight is {weight} pounds, down from {weight} pounds.",
    "Has been under control in the past.",
    "Tolerating {drug} without side effects.",
    "Lives alone and walks {n} blocks daily.",
    "Quit smoking {n} years ago.",
    "{symptom} started {past} after {activity}.",
    "Took {drug} {freq} for {n} years.",
    "Last {procedure} was normal.",
    "History of {condition} diagnosed {n} years ago.",
    "Sleeping {adverb} with occasional {symptom}.",
    "Pain is rated {n} out of 10.",
    "Glucose readings have ranged from {value} to {value}.",
    "Talked to patient about the risks of {condition}.",
    "Was seen in the emergency room {past} for {symptom}.",
    "Bought a home BP device and checks it periodically.",
    "Pretty good about taking {drug}.",
    "{condition} appears stable on the current regimen.",
];

static EXAM: &[&str] = &[
    "Lungs are clear to auscultation bilaterally.",
    "Heart has a regular rate and rhythm.",
    "Abdomen is soft and nontender.",
    "Exam shows {finding}.",
    "Extremities show {finding}.",
    "Alert and oriented with normal mood.",
];

static DRUGS: &[&str] = &[
    "lisinopril",
    "metformin",
    "atorvastatin",
    "amlodipine",
    "metoprolol",
    "losartan",
    "hydrochlorothiazide",
    "simvastatin",
    "insulin glargine",
    "aspirin",
    "warfarin",
    "levothyroxine",
    "gabapentin",
    "omeprazole",
    "prednisone",
    "albuterol",
    "furosemide",
    "sertraline",
];

static LABS: &[&str] = &[
    "lipid panel",
    "LDL",
    "A1c",
    "CBC",
    "BMP",
    "TSH",
    "urinalysis",
    "liver function tests",
    "creatinine",
    "potassium level",
    "INR",
    "vitamin D level",
];

static SYMPTOMS: &[&str] = &[
    "chest pain",
    "shortness of breath",
    "dizziness",
    "headaches",
    "leg swelling",
    "fatigue",
    "palpitations",
    "nausea",
    "back pain",
    "cough",
    "blurred vision",
    "numbness",
];

static CONDITIONS: &[&str] = &[
    "HTN",
    "Diabetes",
    "Hyperlipidemia",
    "Smoking",
    "COPD",
    "Hypothyroidism",
    "GERD",
    "Depression",
    "Obesity",
    "CKD",
    "Asthma",
    "Back pain",
    "Atrial fibrillation",
    "Anemia",
    "Insomnia",
    "Osteoarthritis",
];

static HEADINGS: &[&str] = &[
    "P",
    "P",
    "Plan",
    "Plan",
    "Plan",
    "PLAN",
    "Plans",
    "Recommendations",
    "Recommendation",
    "Instructions",
    "Disposition",
];

static SECAP_HEADERS: &[&str] = &[
    "ASSESSMENT:",
    "ASSESSMENT:",
    "ASSESSMENT AND PLAN:",
    "Assessment:",
    "A/P:",
    "IMPRESSION AND PLAN:",
];

static PROVIDERS: &[&str] = &["physician", "nurse_practitioner", "resident", "physician_assistant"];

static MONTHS: &[&str] = &[
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

static FIRST_NAMES: &[&str] = &[
    "George", "Maria", "James", "Linda", "Robert", "Susan", "David", "Karen", "Thomas", "Nancy", "Ahmed", "Mei",
    "Carlos", "Priya",
];

static LAST_NAMES: &[&str] = &[
    "Smith", "Welby", "Johnson", "Garcia", "Brown", "Miller", "Davis", "Lopez", "Wilson", "Chen", "Patel", "Nguyen",
    "Kowalski",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_patients: 5,
            notes_per_patient: (2, 4),
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic(&small(7)).unwrap();
        let b = generate_synthetic(&small(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&small(8)).unwrap();
        assert_ne!(a.notes, c.notes);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_rate = SynthConfig {
            plan_heading_rate: 1.5,
            ..SynthConfig::default()
        };
        assert!(bad_rate.validate().is_err());
        let bad_range = SynthConfig {
            notes_per_patient: (3, 2),
            ..SynthConfig::default()
        };
        assert!(bad_range.validate().is_err());
        let bad_mix = SynthConfig {
            template_mix: TemplateMix {
                office_visit: 0.5,
                progress: 0.5,
                discharge: 0.1,
            },
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&bad_mix), Err(Error::Config(_))));
    }

    #[test]
    fn ground_truth_covers_every_sentence_without_overlap() {
        let corpus = generate_synthetic(&small(3)).unwrap();
        for note in &corpus.notes {
            let spans: Vec<_> = corpus
                .ground_truth
                .iter()
                .filter(|g| g.note_id == note.note_id)
                .collect();
            assert_eq!(spans.len(), segment_sentences(&note.text).len());
            for w in spans.windows(2) {
                assert!(w[0].end <= w[1].start);
            }
        }
        assert!(corpus.ground_truth.iter().any(|g| g.label.is_plan()));
    }

    #[test]
    fn templates_fill_every_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in PLAN.iter().chain(NONPLAN).chain(EXAM) {
            let s = fill(&mut rng, t);
            assert!(!s.contains('{') && s.chars().next().unwrap().is_uppercase(), "{s}");
        }
    }
}
