//! Post-interview review: both sides score the documents and the interview,
//! scores fuse through a weighted sigmoid, and the handshake produces the
//! match decision.
//!
//! Raw scores live on a 0-10 scale and are centered via z = (s - 5) / 5
//! before fusion, so the neutral score pair fuses to exactly sigmoid(0) = 0.5.

use serde::{Deserialize, Serialize};

use crate::agents::{CandidateAgent, InterviewerAgent, PromptTemplates};
use crate::backend::{BackendError, ChatBackend, ChatMessage, GenerationParams};
use crate::domain::{MatchDecision, Side, SideEvaluation, Transcript};

/// Re-asks issued on unparseable evaluator output before giving up.
pub const MAX_REASKS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// (w_doc, w_int) for the interviewer side.
    pub weights_interviewer: (f64, f64),
    /// (w_doc, w_int) for the candidate side.
    pub weights_candidate: (f64, f64),
    pub accept_threshold: f64,
    pub score_scale_max: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            weights_interviewer: (0.5, 0.5),
            weights_candidate: (0.5, 0.5),
            accept_threshold: 0.5,
            score_scale_max: 10.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (w_doc, w_int) in [self.weights_interviewer, self.weights_candidate] {
            if w_doc < 0.0 || w_int < 0.0 || (w_doc + w_int - 1.0).abs() > 1e-9 {
                return Err(EvalError::Domain(format!(
                    "weights must be nonnegative and sum to 1, got ({w_doc}, {w_int})"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.accept_threshold) || self.accept_threshold == 0.0 {
            return Err(EvalError::Domain(format!(
                "accept_threshold must lie in (0,1), got {}",
                self.accept_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no parseable score after {reasks} re-asks; raw output: {raw:?}")]
    Unparseable { reasks: u32, raw: String },
    #[error("transcript is not completed")]
    IncompleteTranscript,
    #[error("document must be non-empty")]
    EmptyDocument,
    #[error("domain violation: {0}")]
    Domain(String),
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Extracts the first numeral within [0, max] from evaluator output.
/// Out-of-range numbers are rejected, which triggers a re-ask upstream.
pub fn parse_score(text: &str, max: f64) -> Option<f64> {
    static NUMBER: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let re = NUMBER.get_or_init(|| regex::Regex::new(r"\d+(?:\.\d+)?").expect("static regex"));
    for m in re.find_iter(text) {
        if let Ok(value) = m.as_str().parse::<f64>() {
            if (0.0..=max).contains(&value) {
                return Some(value);
            }
        }
    }
    None
}

fn evaluator_template(side: Side, templates: &PromptTemplates) -> &str {
    match side {
        Side::Interviewer => &templates.interviewer_eval,
        Side::Candidate => &templates.candidate_eval,
    }
}

fn ask_for_score(
    messages: &[ChatMessage],
    backend: &dyn ChatBackend,
    params: &GenerationParams,
    max: f64,
) -> Result<(f64, String), EvalError> {
    let mut last_raw = String::new();
    for reask in 0..=MAX_REASKS {
        let raw = backend.complete(messages, params)?;
        if let Some(score) = parse_score(&raw, max) {
            return Ok((score, raw));
        }
        last_raw = raw;
        let _ = reask;
    }
    Err(EvalError::Unparseable { reasks: MAX_REASKS, raw: last_raw })
}

fn score_format_line(max: f64) -> String {
    format!("Respond in the format \"Score: <0-{max}>\".")
}

/// The basic document-fit score: one evaluator completion over resume and
/// job description only.
pub fn score_documents(
    side: Side,
    resume: &str,
    jd: &str,
    templates: &PromptTemplates,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
    max: f64,
) -> Result<(f64, String), EvalError> {
    if resume.trim().is_empty() || jd.trim().is_empty() {
        return Err(EvalError::EmptyDocument);
    }
    let user = format!(
        "{}\n\nGive the basic resume/job matching score now, before considering \
         any interview. {}\n\nResume:\n{}\n\nJob Description:\n{}",
        evaluator_template(side, templates),
        score_format_line(max),
        resume,
        jd
    );
    let messages = [ChatMessage::user(user)];
    ask_for_score(&messages, backend, params, max)
}

/// The interview-performance score: one evaluator completion over the full
/// transcript rendering plus both documents.
pub fn score_interview(
    side: Side,
    transcript: &Transcript,
    resume: &str,
    jd: &str,
    templates: &PromptTemplates,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
    max: f64,
) -> Result<(f64, String), EvalError> {
    if !transcript.is_completed() {
        return Err(EvalError::IncompleteTranscript);
    }
    let user = format!(
        "{}\n\nGive the comprehensive matching score now. {}\n\nResume:\n{}\n\n\
         Job Description:\n{}\n\nInterview Dialogue Context History:\n{}",
        evaluator_template(side, templates),
        score_format_line(max),
        resume,
        jd,
        transcript.render()
    );
    let messages = [ChatMessage::user(user)];
    ask_for_score(&messages, backend, params, max)
}

/// Fuses a document score and an interview score into one side's acceptance:
/// z = (s - 5) / 5 per score, fused = sigmoid(w_doc * z_doc + w_int * z_int),
/// accept when fused >= threshold.
pub fn fuse(
    document_score: f64,
    interview_score: f64,
    weights: (f64, f64),
    threshold: f64,
) -> Result<SideEvaluation, EvalError> {
    let (w_doc, w_int) = weights;
    if w_doc < 0.0 || w_int < 0.0 || (w_doc + w_int - 1.0).abs() > 1e-9 {
        return Err(EvalError::Domain(format!(
            "weights must be nonnegative and sum to 1, got ({w_doc}, {w_int})"
        )));
    }
    for s in [document_score, interview_score] {
        if !(0.0..=10.0).contains(&s) {
            return Err(EvalError::Domain(format!("score {s} outside [0, 10]")));
        }
    }
    if !(0.0..1.0).contains(&threshold) || threshold == 0.0 {
        return Err(EvalError::Domain(format!("threshold {threshold} outside (0,1)")));
    }
    let z = |s: f64| (s - 5.0) / 5.0;
    let fused = sigmoid(w_doc * z(document_score) + w_int * z(interview_score));
    Ok(SideEvaluation {
        document_score,
        interview_score,
        weights,
        fused,
        threshold,
        accept: fused >= threshold,
        rationale: String::new(),
    })
}

/// A match forms only when both sides accept.
pub fn handshake(
    interviewer_id: impl Into<String>,
    candidate_id: impl Into<String>,
    interviewer_eval: SideEvaluation,
    candidate_eval: SideEvaluation,
) -> MatchDecision {
    let matched = interviewer_eval.accept && candidate_eval.accept;
    MatchDecision {
        interviewer_id: interviewer_id.into(),
        candidate_id: candidate_id.into(),
        interviewer_eval,
        candidate_eval,
        matched,
        error: None,
    }
}

fn failed_side(threshold: f64) -> SideEvaluation {
    SideEvaluation {
        document_score: 0.0,
        interview_score: 0.0,
        weights: (0.5, 0.5),
        fused: 0.0,
        threshold,
        accept: false,
        rationale: String::new(),
    }
}

/// Composes the four scoring calls, two fusions, and the handshake. A
/// scoring failure on either side marks the pair unmatched with the error
/// annotated, never matched. With `transcript` absent the interview weights
/// must be zero and only the document scores are obtained.
pub fn evaluate_pair(
    interviewer: &InterviewerAgent,
    candidate: &CandidateAgent,
    transcript: Option<&Transcript>,
    config: &EvalConfig,
    templates: &PromptTemplates,
    interviewer_backend: &dyn ChatBackend,
    candidate_backend: &dyn ChatBackend,
    params: &GenerationParams,
) -> MatchDecision {
    let resume = &candidate.profile.resume_text;
    let jd = &interviewer.posting.description_text;
    let threshold = config.accept_threshold;
    let max = config.score_scale_max;

    let side_eval = |side: Side,
                     weights: (f64, f64),
                     backend: &dyn ChatBackend|
     -> Result<SideEvaluation, EvalError> {
        let (doc_score, doc_raw) =
            score_documents(side, resume, jd, templates, backend, params, max)?;
        let (int_score, int_raw) = match transcript {
            Some(t) => score_interview(side, t, resume, jd, templates, backend, params, max)?,
            None => {
                if weights.1 != 0.0 {
                    return Err(EvalError::Domain(
                        "interview weight must be 0 when no transcript is available".into(),
                    ));
                }
                // neutral placeholder; weight 0 keeps it out of the fusion
                (5.0, String::new())
            }
        };
        let mut eval = fuse(doc_score, int_score, weights, threshold)?;
        eval.rationale = if int_raw.is_empty() {
            doc_raw
        } else {
            format!("document: {doc_raw}\ninterview: {int_raw}")
        };
        Ok(eval)
    };

    let i_result = side_eval(Side::Interviewer, config.weights_interviewer, interviewer_backend);
    let c_result = side_eval(Side::Candidate, config.weights_candidate, candidate_backend);

    match (i_result, c_result) {
        (Ok(i_eval), Ok(c_eval)) => {
            handshake(interviewer.id.clone(), candidate.id.clone(), i_eval, c_eval)
        }
        (i_result, c_result) => {
            let mut errors = Vec::new();
            if let Err(e) = &i_result {
                errors.push(format!("interviewer side: {e}"));
            }
            if let Err(e) = &c_result {
                errors.push(format!("candidate side: {e}"));
            }
            MatchDecision {
                interviewer_id: interviewer.id.clone(),
                candidate_id: candidate.id.clone(),
                interviewer_eval: i_result.unwrap_or_else(|_| failed_side(threshold)),
                candidate_eval: c_result.unwrap_or_else(|_| failed_side(threshold)),
                matched: false,
                error: Some(errors.join("; ")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{create_candidate, create_interviewer};
    use crate::backend::{ScriptedBackend, ScriptedBackendConfig, ScriptedResponse};
    use crate::domain::{CandidateProfile, JobPosting, Strategy};
    use proptest::prelude::*;

    fn scripted(responses: &[&str]) -> ScriptedBackend {
        ScriptedBackend::from_queue(responses.iter().map(|s| s.to_string()))
    }

    fn completed_transcript() -> Transcript {
        let mut t = Transcript::new("j1", "c1");
        for i in 1..=5 {
            t.push_question(format!("Question number {i}?")).unwrap();
            t.push_answer(format!("Answer number {i}.")).unwrap();
        }
        t.complete().unwrap();
        t
    }

    #[test]
    fn parse_score_takes_first_in_range_numeral() {
        assert_eq!(parse_score("Score: 8/10 because strong Java", 10.0), Some(8.0));
        assert_eq!(parse_score("7", 10.0), Some(7.0));
        assert_eq!(parse_score("I'd say 6.5 overall", 10.0), Some(6.5));
        assert_eq!(parse_score("no number here", 10.0), None);
        // out-of-range numerals are skipped, later in-range ones accepted
        assert_eq!(parse_score("15 is wrong but 9 fits", 10.0), Some(9.0));
        assert_eq!(parse_score("15", 10.0), None);
    }

    #[test]
    fn score_documents_parses_and_reasks() {
        let templates = PromptTemplates::default();
        let params = GenerationParams::default();
        let backend = scripted(&["Score: 8/10 good fit"]);
        let (score, raw) = score_documents(
            Side::Interviewer, "resume", "jd", &templates, &backend, &params, 10.0,
        )
        .unwrap();
        assert_eq!(score, 8.0);
        assert!(raw.contains("good fit"));

        // two unparseable outputs then a numeral: three backend calls total
        let backend = scripted(&["no number here", "still nothing", "7"]);
        let (score, _) = score_documents(
            Side::Interviewer, "resume", "jd", &templates, &backend, &params, 10.0,
        )
        .unwrap();
        assert_eq!(score, 7.0);
        assert_eq!(backend.call_count(), 3);
    }

    #[test]
    fn score_documents_gives_up_after_reasks() {
        let templates = PromptTemplates::default();
        let backend = scripted(&["nope", "nope", "nope"]);
        let err = score_documents(
            Side::Candidate, "r", "j", &templates, &backend,
            &GenerationParams::default(), 10.0,
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::Unparseable { reasks: 2, .. }));
    }

    #[test]
    fn out_of_range_score_triggers_reask() {
        let templates = PromptTemplates::default();
        let backend = scripted(&["15", "9"]);
        let (score, _) = score_documents(
            Side::Interviewer, "r", "j", &templates, &backend,
            &GenerationParams::default(), 10.0,
        )
        .unwrap();
        assert_eq!(score, 9.0);
        assert_eq!(backend.call_count(), 2);
    }

    #[test]
    fn score_interview_requires_completed_transcript_and_embeds_turns() {
        let templates = PromptTemplates::default();
        let params = GenerationParams::default();
        let incomplete = Transcript::new("j1", "c1");
        let backend = scripted(&["9"]);
        assert!(matches!(
            score_interview(Side::Interviewer, &incomplete, "r", "j", &templates, &backend, &params, 10.0),
            Err(EvalError::IncompleteTranscript)
        ));

        let transcript = completed_transcript();
        let backend = scripted(&["9"]);
        let (score, _) = score_interview(
            Side::Interviewer, &transcript, "r", "j", &templates, &backend, &params, 10.0,
        )
        .unwrap();
        assert_eq!(score, 9.0);
        // prompt containment is asserted structurally on the render itself
        let rendered = transcript.render();
        for i in 1..=5 {
            assert!(rendered.contains(&format!("Q{i}: Question number {i}?")));
            assert!(rendered.contains(&format!("A{i}: Answer number {i}.")));
        }
    }

    #[test]
    fn fuse_midpoint_is_exactly_half() {
        for weights in [(0.5, 0.5), (0.3, 0.7), (1.0, 0.0)] {
            let eval = fuse(5.0, 5.0, weights, 0.5).unwrap();
            assert_eq!(eval.fused, 0.5);
            assert!(eval.accept);
        }
    }

    #[test]
    fn fuse_matches_logistic_oracle() {
        let eval = fuse(10.0, 10.0, (0.5, 0.5), 0.5).unwrap();
        assert!((eval.fused - 0.7310585786300049).abs() < 1e-12);
        let eval = fuse(0.0, 10.0, (1.0, 0.0), 0.5).unwrap();
        assert!((eval.fused - 0.2689414213699951).abs() < 1e-12);
        assert!(!eval.accept);
    }

    #[test]
    fn fuse_rejects_domain_violations() {
        assert!(fuse(11.0, 5.0, (0.5, 0.5), 0.5).is_err());
        assert!(fuse(5.0, -1.0, (0.5, 0.5), 0.5).is_err());
        assert!(fuse(5.0, 5.0, (0.6, 0.6), 0.5).is_err());
        assert!(fuse(5.0, 5.0, (-0.2, 1.2), 0.5).is_err());
        assert!(fuse(5.0, 5.0, (0.5, 0.5), 0.0).is_err());
        assert!(fuse(5.0, 5.0, (0.5, 0.5), 1.0).is_err());
    }

    #[test]
    fn handshake_truth_table() {
        let accept = fuse(9.0, 9.0, (0.5, 0.5), 0.5).unwrap();
        let reject = fuse(1.0, 1.0, (0.5, 0.5), 0.5).unwrap();
        assert!(handshake("i", "c", accept.clone(), accept.clone()).matched);
        assert!(!handshake("i", "c", accept.clone(), reject.clone()).matched);
        assert!(!handshake("i", "c", reject.clone(), accept.clone()).matched);
        assert!(!handshake("i", "c", reject.clone(), reject.clone()).matched);
    }

    fn agents() -> (InterviewerAgent, CandidateAgent) {
        let templates = PromptTemplates::default();
        let posting = JobPosting {
            id: "j1".into(),
            description_text: "Java backend role.".into(),
            attributes: Default::default(),
        };
        let profile = CandidateProfile {
            id: "c1".into(),
            resume_text: "Java and Linux experience.".into(),
            attributes: Default::default(),
        };
        (
            create_interviewer(&posting, Strategy::initial("m0"), &templates).unwrap(),
            create_candidate(&profile, Strategy::initial("m0"), &templates).unwrap(),
        )
    }

    #[test]
    fn evaluate_pair_composes_scores_and_handshake() {
        let (interviewer, candidate) = agents();
        let transcript = completed_transcript();
        let config = EvalConfig::default();
        let templates = PromptTemplates::default();
        let params = GenerationParams::default();
        // interviewer backend serves (S_r=8, S_q=9), candidate (S_j=7, S_a=8)
        let i_backend = scripted(&["8", "9"]);
        let c_backend = scripted(&["7", "8"]);
        let decision = evaluate_pair(
            &interviewer, &candidate, Some(&transcript), &config, &templates,
            &i_backend, &c_backend, &params,
        );
        assert!((decision.interviewer_eval.fused - sigmoid(0.7)).abs() < 1e-12);
        assert!((decision.candidate_eval.fused - sigmoid(0.5)).abs() < 1e-12);
        assert!(decision.matched);
        assert!(decision.error.is_none());

        // interviewer rejects on (2, 3): sigmoid(-0.5) < 0.5
        let i_backend = scripted(&["2", "3"]);
        let c_backend = scripted(&["9", "9"]);
        let decision = evaluate_pair(
            &interviewer, &candidate, Some(&transcript), &config, &templates,
            &i_backend, &c_backend, &params,
        );
        assert!((decision.interviewer_eval.fused - sigmoid(-0.5)).abs() < 1e-12);
        assert!(!decision.matched);
    }

    #[test]
    fn evaluate_pair_scoring_failure_is_unmatched_with_error() {
        let (interviewer, candidate) = agents();
        let transcript = completed_transcript();
        let i_backend = scripted(&["8", "9"]);
        let c_backend = ScriptedBackend::new(ScriptedBackendConfig {
            responses: vec![ScriptedResponse::Error { error: "down".into() }],
            ..Default::default()
        });
        let decision = evaluate_pair(
            &interviewer, &candidate, Some(&transcript), &EvalConfig::default(),
            &PromptTemplates::default(), &i_backend, &c_backend,
            &GenerationParams::default(),
        );
        assert!(!decision.matched);
        assert!(decision.error.as_deref().unwrap().contains("candidate side"));
    }

    #[test]
    fn evaluate_pair_without_transcript_uses_documents_only() {
        let (interviewer, candidate) = agents();
        let config = EvalConfig {
            weights_interviewer: (1.0, 0.0),
            weights_candidate: (1.0, 0.0),
            ..Default::default()
        };
        let i_backend = scripted(&["8"]);
        let c_backend = scripted(&["7"]);
        let decision = evaluate_pair(
            &interviewer, &candidate, None, &config, &PromptTemplates::default(),
            &i_backend, &c_backend, &GenerationParams::default(),
        );
        assert!(decision.matched);
        assert_eq!(i_backend.call_count(), 1);
        assert_eq!(c_backend.call_count(), 1);
    }

    proptest! {
        #[test]
        fn fuse_is_monotone_in_each_score(
            doc in 0.0f64..10.0,
            int in 0.0f64..10.0,
            w in 0.0f64..=1.0,
            bump in 0.01f64..2.0,
        ) {
            let weights = (w, 1.0 - w);
            let base = fuse(doc, int, weights, 0.5).unwrap().fused;
            let up_doc = fuse((doc + bump).min(10.0), int, weights, 0.5).unwrap().fused;
            let up_int = fuse(doc, (int + bump).min(10.0), weights, 0.5).unwrap().fused;
            prop_assert!(up_doc >= base - 1e-15);
            prop_assert!(up_int >= base - 1e-15);
        }

        #[test]
        fn weight_degenerate_fusion_ignores_interview_score(
            doc in 0.0f64..10.0,
            int_a in 0.0f64..10.0,
            int_b in 0.0f64..10.0,
        ) {
            let a = fuse(doc, int_a, (1.0, 0.0), 0.5).unwrap().fused;
            let b = fuse(doc, int_b, (1.0, 0.0), 0.5).unwrap().fused;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn accept_depends_only_on_linear_combination_sign(
            doc in 0.0f64..10.0,
            int in 0.0f64..10.0,
            w in 0.0f64..=1.0,
            threshold in 0.05f64..0.95,
        ) {
            let weights = (w, 1.0 - w);
            let eval = fuse(doc, int, weights, threshold).unwrap();
            let z = |s: f64| (s - 5.0) / 5.0;
            let logit = (threshold / (1.0 - threshold)).ln();
            let combo = w * z(doc) + (1.0 - w) * z(int) - logit;
            prop_assume!(combo.abs() > 1e-9);
            prop_assert_eq!(eval.accept, combo > 0.0);
        }
    }
}
