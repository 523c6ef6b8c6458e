//! Core data model shared by every other module.
//!
//! All types here are immutable values once constructed and serialize to
//! JSON with snake_case field names; corpora are JSON Lines.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// A candidate's resume document plus group attributes used for slicing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProfile {
    pub id: String,
    pub resume_text: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// A job description document plus group attributes (e.g. job category).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobPosting {
    pub id: String,
    pub description_text: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// One question/answer exchange. The answer is absent only transiently
/// while the candidate's response is pending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based turn number.
    pub index: u32,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptStatus {
    InProgress,
    Completed,
}

/// The ordered dialogue context for one (interviewer, candidate) session.
///
/// Turn indices are a contiguous 1..n sequence. A completed transcript has
/// every turn answered; the partial context is the transcript with the
/// final turn's answer absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub interviewer_id: String,
    pub candidate_id: String,
    pub turns: Vec<Turn>,
    pub status: TranscriptStatus,
}

impl Transcript {
    pub fn new(interviewer_id: impl Into<String>, candidate_id: impl Into<String>) -> Self {
        Self {
            interviewer_id: interviewer_id.into(),
            candidate_id: candidate_id.into(),
            turns: Vec::new(),
            status: TranscriptStatus::InProgress,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.status == TranscriptStatus::Completed
    }

    /// True when the last turn has a question awaiting its answer.
    pub fn has_pending_question(&self) -> bool {
        self.turns.last().is_some_and(|t| t.answer.is_none())
    }

    /// Appends the next question, keeping indices contiguous.
    pub fn push_question(&mut self, question: impl Into<String>) -> Result<(), DomainError> {
        if self.has_pending_question() {
            return Err(DomainError::PendingQuestion);
        }
        let question = question.into();
        if question.is_empty() {
            return Err(DomainError::EmptyText("question"));
        }
        self.turns.push(Turn {
            index: self.turns.len() as u32 + 1,
            question,
            answer: None,
        });
        Ok(())
    }

    /// Fills in the answer for the pending question.
    pub fn push_answer(&mut self, answer: impl Into<String>) -> Result<(), DomainError> {
        let answer = answer.into();
        if answer.is_empty() {
            return Err(DomainError::EmptyText("answer"));
        }
        match self.turns.last_mut() {
            Some(turn) if turn.answer.is_none() => {
                turn.answer = Some(answer);
                Ok(())
            }
            _ => Err(DomainError::NoPendingQuestion),
        }
    }

    pub fn complete(&mut self) -> Result<(), DomainError> {
        if self.has_pending_question() {
            return Err(DomainError::PendingQuestion);
        }
        self.status = TranscriptStatus::Completed;
        Ok(())
    }

    /// Deterministic textual rendering of the dialogue context, used by all
    /// prompt assembly. Completed turns render as "Q<i>: .. / A<i>: .." line
    /// pairs; a pending question renders as a trailing "Q<i>:" line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for turn in &self.turns {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("Q{}: {}", turn.index, turn.question));
            if let Some(answer) = &turn.answer {
                out.push_str(&format!("\nA{}: {}", turn.index, answer));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyOrigin {
    Initial,
    Refined,
}

/// Natural-language questioning or answering strategy text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub text: String,
    pub origin: StrategyOrigin,
    /// (interviewer_id, candidate_id) of the session the refinement came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_session: Option<(String, String)>,
}

impl Strategy {
    pub fn initial(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: StrategyOrigin::Initial,
            source_session: None,
        }
    }

    pub fn refined(
        text: impl Into<String>,
        interviewer_id: impl Into<String>,
        candidate_id: impl Into<String>,
    ) -> Self {
        Self {
            text: text.into(),
            origin: StrategyOrigin::Refined,
            source_session: Some((interviewer_id.into(), candidate_id.into())),
        }
    }
}

/// One side's post-interview judgement: component scores on a 0-10 scale,
/// the fused acceptance value in (0,1), and the resulting accept flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideEvaluation {
    pub document_score: f64,
    pub interview_score: f64,
    /// (w_doc, w_int), nonnegative, summing to 1.
    pub weights: (f64, f64),
    pub fused: f64,
    pub threshold: f64,
    pub accept: bool,
    #[serde(default)]
    pub rationale: String,
}

/// The handshake outcome: matched only when both sides accept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub interviewer_id: String,
    pub candidate_id: String,
    pub interviewer_eval: SideEvaluation,
    pub candidate_eval: SideEvaluation,
    pub matched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Interviewer,
    Candidate,
}

/// One remembered session: the counterpart's document, the full transcript,
/// and the strategy refined from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub counterpart_id: String,
    pub counterpart_document: String,
    pub transcript: Transcript,
    pub refined_strategy: Strategy,
}

/// Per-agent store of matched sessions, at most one entry per counterpart
/// (latest wins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionMemory {
    pub owner_id: String,
    pub side: Side,
    pub entries: Vec<MemoryEntry>,
}

impl ReflectionMemory {
    pub fn empty(owner_id: impl Into<String>, side: Side) -> Self {
        Self {
            owner_id: owner_id.into(),
            side,
            entries: Vec::new(),
        }
    }
}

/// A gold match label for one (candidate, job) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub candidate_id: String,
    pub job_id: String,
    pub matched: bool,
}

/// Gold labels keyed by (candidate_id, job_id).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabels {
    pub labels: BTreeMap<(String, String), bool>,
}

impl GoldLabels {
    pub fn from_iter(labels: impl IntoIterator<Item = GoldLabel>) -> Self {
        Self {
            labels: labels
                .into_iter()
                .map(|l| ((l.candidate_id, l.job_id), l.matched))
                .collect(),
        }
    }

    pub fn get(&self, candidate_id: &str, job_id: &str) -> Option<bool> {
        self.labels
            .get(&(candidate_id.to_string(), job_id.to_string()))
            .copied()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("transcript already has a pending question")]
    PendingQuestion,
    #[error("transcript has no pending question")]
    NoPendingQuestion,
    #[error("{0} must be non-empty")]
    EmptyText(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// One corpus validation finding. Callers decide fatality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub subject_id: String,
    pub message: String,
}

/// Checks a corpus for duplicate ids, empty documents, and attributes
/// missing for any configured slice. Valid corpora yield zero findings.
pub fn validate_corpus(
    profiles: &[CandidateProfile],
    postings: &[JobPosting],
    slice_attributes: &[String],
) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for p in profiles {
        if !seen.insert(&p.id) {
            findings.push(Finding {
                severity: Severity::Error,
                subject_id: p.id.clone(),
                message: "duplicate candidate id".into(),
            });
        }
        if p.resume_text.trim().is_empty() {
            findings.push(Finding {
                severity: Severity::Error,
                subject_id: p.id.clone(),
                message: "empty resume document".into(),
            });
        }
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for j in postings {
        if !seen.insert(&j.id) {
            findings.push(Finding {
                severity: Severity::Error,
                subject_id: j.id.clone(),
                message: "duplicate job id".into(),
            });
        }
        if j.description_text.trim().is_empty() {
            findings.push(Finding {
                severity: Severity::Error,
                subject_id: j.id.clone(),
                message: "empty job description document".into(),
            });
        }
    }
    for attr in slice_attributes {
        let on_candidates = profiles.iter().any(|p| p.attributes.contains_key(attr));
        let on_jobs = postings.iter().any(|j| j.attributes.contains_key(attr));
        if on_candidates {
            for p in profiles.iter().filter(|p| !p.attributes.contains_key(attr)) {
                findings.push(Finding {
                    severity: Severity::Warning,
                    subject_id: p.id.clone(),
                    message: format!("missing slice attribute '{attr}'"),
                });
            }
        }
        if on_jobs {
            for j in postings.iter().filter(|j| !j.attributes.contains_key(attr)) {
                findings.push(Finding {
                    severity: Severity::Warning,
                    subject_id: j.id.clone(),
                    message: format!("missing slice attribute '{attr}'"),
                });
            }
        }
        if !on_candidates && !on_jobs {
            findings.push(Finding {
                severity: Severity::Error,
                subject_id: attr.clone(),
                message: "slice attribute unknown to both corpora".into(),
            });
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, text: &str) -> CandidateProfile {
        CandidateProfile {
            id: id.into(),
            resume_text: text.into(),
            attributes: BTreeMap::new(),
        }
    }

    fn posting(id: &str, text: &str) -> JobPosting {
        JobPosting {
            id: id.into(),
            description_text: text.into(),
            attributes: BTreeMap::new(),
        }
    }

    #[test]
    fn transcript_alternates_and_renders() {
        let mut t = Transcript::new("i1", "c1");
        assert_eq!(t.render(), "");
        t.push_question("What is Java?").unwrap();
        assert!(t.has_pending_question());
        assert_eq!(t.render(), "Q1: What is Java?");
        assert_eq!(t.push_question("again"), Err(DomainError::PendingQuestion));
        t.push_answer("A language.").unwrap();
        assert_eq!(t.render(), "Q1: What is Java?\nA1: A language.");
        t.push_question("And Linux?").unwrap();
        assert_eq!(
            t.render(),
            "Q1: What is Java?\nA1: A language.\nQ2: And Linux?"
        );
        assert_eq!(t.complete(), Err(DomainError::PendingQuestion));
        t.push_answer("A kernel.").unwrap();
        t.complete().unwrap();
        assert!(t.is_completed());
        let indices: Vec<u32> = t.turns.iter().map(|t| t.index).collect();
        assert_eq!(indices, vec![1, 2]);
    }

    #[test]
    fn push_answer_requires_pending_question() {
        let mut t = Transcript::new("i1", "c1");
        assert_eq!(t.push_answer("x"), Err(DomainError::NoPendingQuestion));
    }

    #[test]
    fn validate_corpus_reports_duplicates_and_empties() {
        let profiles = vec![profile("c1", "java"), profile("c1", "linux")];
        let postings = vec![posting("j1", "")];
        let findings = validate_corpus(&profiles, &postings, &[]);
        assert_eq!(findings.len(), 2);
        assert!(findings.iter().any(|f| f.message.contains("duplicate candidate id")));
        assert!(findings.iter().any(|f| f.message.contains("empty job description")));
    }

    #[test]
    fn validate_corpus_clean_pair_has_zero_findings() {
        let profiles = vec![profile("c1", "java"), profile("c2", "linux")];
        let postings = vec![posting("j1", "backend dev")];
        assert!(validate_corpus(&profiles, &postings, &[]).is_empty());
    }

    #[test]
    fn validate_corpus_flags_missing_slice_attribute() {
        let mut p1 = profile("c1", "java");
        p1.attributes.insert("gender".into(), "female".into());
        let p2 = profile("c2", "linux");
        let findings = validate_corpus(&[p1, p2], &[posting("j1", "x")], &["gender".into()]);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].subject_id, "c2");
    }

    #[test]
    fn serialization_round_trip() {
        let decision = MatchDecision {
            interviewer_id: "i1".into(),
            candidate_id: "c1".into(),
            interviewer_eval: SideEvaluation {
                document_score: 8.0,
                interview_score: 9.0,
                weights: (0.5, 0.5),
                fused: 0.668,
                threshold: 0.5,
                accept: true,
                rationale: "good".into(),
            },
            candidate_eval: SideEvaluation {
                document_score: 7.0,
                interview_score: 8.0,
                weights: (0.5, 0.5),
                fused: 0.622,
                threshold: 0.5,
                accept: true,
                rationale: "fine".into(),
            },
            matched: true,
            error: None,
        };
        let json = serde_json::to_string(&decision).unwrap();
        let back: MatchDecision = serde_json::from_str(&json).unwrap();
        assert_eq!(back, decision);
    }
}
