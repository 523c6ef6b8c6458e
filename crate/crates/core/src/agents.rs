//! Role instantiation and the two interview-stage behaviors: question
//! raising (with the diversity guard) and response generation.
//!
//! Prompt templates ship as plain-text assets and can be overridden from a
//! directory so wording stays adjustable without rebuilds.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ChatBackend, ChatMessage, GenerationParams};
use crate::domain::{
    CandidateProfile, JobPosting, ReflectionMemory, Side, Strategy, Transcript,
};
use crate::text::ngram_jaccard;

/// Token 3-gram Jaccard similarity above which a candidate question counts
/// as a duplicate of a previous one.
pub const DEFAULT_DUPLICATE_THRESHOLD: f64 = 0.6;
/// Total generation attempts for one question (1 initial + 2 regenerations).
pub const DEFAULT_MAX_REGEN_ATTEMPTS: u32 = 3;

/// The behavior prompt texts for all four LLM-driven operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub question: String,
    pub response: String,
    pub interviewer_eval: String,
    pub candidate_eval: String,
    pub initial_interviewer_strategy: String,
    pub initial_candidate_strategy: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            question: include_str!("../assets/f_ques.txt").to_string(),
            response: include_str!("../assets/g_resp.txt").to_string(),
            interviewer_eval: include_str!("../assets/f_eval.txt").to_string(),
            candidate_eval: include_str!("../assets/g_eval.txt").to_string(),
            initial_interviewer_strategy: include_str!("../assets/m0_interviewer.txt").to_string(),
            initial_candidate_strategy: include_str!("../assets/m0_candidate.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads overrides from a directory; files not present keep the built-in
    /// text. Recognized names: f_ques.txt, g_resp.txt, f_eval.txt,
    /// g_eval.txt, m0_interviewer.txt, m0_candidate.txt.
    pub fn from_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref();
        let mut templates = Self::default();
        let slots: [(&str, &mut String); 6] = [
            ("f_ques.txt", &mut templates.question),
            ("g_resp.txt", &mut templates.response),
            ("f_eval.txt", &mut templates.interviewer_eval),
            ("g_eval.txt", &mut templates.candidate_eval),
            ("m0_interviewer.txt", &mut templates.initial_interviewer_strategy),
            ("m0_candidate.txt", &mut templates.initial_candidate_strategy),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(templates)
    }
}

/// Excerpt of a retrieved memory entry attached to a prompt: the question
/// (or answer) lines from a past matched session with a similar counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryExcerpt {
    pub counterpart_id: String,
    pub lines: Vec<String>,
}

/// Everything that goes into one agent's behavior prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub role_preamble: String,
    pub behavior_template: String,
    pub strategy: Strategy,
    #[serde(default)]
    pub retrieved_examples: Vec<MemoryExcerpt>,
    pub max_regen_attempts: u32,
}

#[derive(Debug, Clone)]
pub struct InterviewerAgent {
    pub id: String,
    pub posting: JobPosting,
    pub prompt_config: PromptConfig,
    pub memory: ReflectionMemory,
}

#[derive(Debug, Clone)]
pub struct CandidateAgent {
    pub id: String,
    pub profile: CandidateProfile,
    pub prompt_config: PromptConfig,
    pub memory: ReflectionMemory,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("document for {0} is empty")]
    EmptyDocument(String),
    #[error("transcript has no pending question")]
    NoPendingQuestion,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn create_interviewer(
    posting: &JobPosting,
    initial_strategy: Strategy,
    templates: &PromptTemplates,
) -> Result<InterviewerAgent, AgentError> {
    if posting.description_text.trim().is_empty() {
        return Err(AgentError::EmptyDocument(posting.id.clone()));
    }
    let preamble = format!(
        "You are an interviewer hiring for the following position. Comprehend \
         the job requirements and assess candidates against them.\n\nJob Description:\n{}",
        posting.description_text
    );
    Ok(InterviewerAgent {
        id: posting.id.clone(),
        posting: posting.clone(),
        prompt_config: PromptConfig {
            role_preamble: preamble,
            behavior_template: templates.question.clone(),
            strategy: initial_strategy,
            retrieved_examples: Vec::new(),
            max_regen_attempts: DEFAULT_MAX_REGEN_ATTEMPTS,
        },
        memory: ReflectionMemory::empty(posting.id.clone(), Side::Interviewer),
    })
}

pub fn create_candidate(
    profile: &CandidateProfile,
    initial_strategy: Strategy,
    templates: &PromptTemplates,
) -> Result<CandidateAgent, AgentError> {
    if profile.resume_text.trim().is_empty() {
        return Err(AgentError::EmptyDocument(profile.id.clone()));
    }
    let preamble = format!(
        "You are a job seeker interviewing for a position. Present the skills \
         and experiences from your resume truthfully.\n\nResume:\n{}",
        profile.resume_text
    );
    Ok(CandidateAgent {
        id: profile.id.clone(),
        profile: profile.clone(),
        prompt_config: PromptConfig {
            role_preamble: preamble,
            behavior_template: templates.response.clone(),
            strategy: initial_strategy,
            retrieved_examples: Vec::new(),
            max_regen_attempts: DEFAULT_MAX_REGEN_ATTEMPTS,
        },
        memory: ReflectionMemory::empty(profile.id.clone(), Side::Candidate),
    })
}

fn system_message(config: &PromptConfig, excerpt_label: &str) -> ChatMessage {
    let mut content = format!("{}\n\nStrategy: {}", config.role_preamble, config.strategy.text);
    for excerpt in &config.retrieved_examples {
        content.push_str(&format!(
            "\n\n{excerpt_label} (from a past matched interview with {}):\n{}",
            excerpt.counterpart_id,
            excerpt.lines.join("\n")
        ));
    }
    ChatMessage::system(content)
}

fn user_message(template: &str, resume: &str, jd: &str, context: &str) -> ChatMessage {
    let mut content = format!("{template}\n\nResume:\n{resume}\n\nJob Description:\n{jd}");
    if !context.is_empty() {
        content.push_str(&format!("\n\nInterview Dialogue Context:\n{context}"));
    }
    ChatMessage::user(content)
}

/// Builds the question-raising prompt: system = preamble + strategy +
/// retrieved excerpts; user = behavior template + resume + job description +
/// rendered dialogue context (omitted while empty).
pub fn assemble_question_prompt(
    agent: &InterviewerAgent,
    transcript: &Transcript,
    profile: &CandidateProfile,
) -> Vec<ChatMessage> {
    vec![
        system_message(&agent.prompt_config, "Reference questions"),
        user_message(
            &agent.prompt_config.behavior_template,
            &profile.resume_text,
            &agent.posting.description_text,
            &transcript.render(),
        ),
    ]
}

/// Builds the response prompt over the partial context that ends with the
/// pending question.
pub fn assemble_response_prompt(
    agent: &CandidateAgent,
    transcript: &Transcript,
    posting: &JobPosting,
) -> Vec<ChatMessage> {
    vec![
        system_message(&agent.prompt_config, "Reference answers"),
        user_message(
            &agent.prompt_config.behavior_template,
            &agent.profile.resume_text,
            &posting.description_text,
            &transcript.render(),
        ),
    ]
}

/// A question accepted by the diversity guard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaisedQuestion {
    pub text: String,
    /// Backend calls spent on this question (1 when no regeneration).
    pub attempts: u32,
    /// Set when every attempt overlapped a previous question above the
    /// duplicate threshold and the least-overlapping one was accepted.
    pub duplicate_warning: bool,
}

fn max_overlap(question: &str, transcript: &Transcript) -> f64 {
    transcript
        .turns
        .iter()
        .map(|t| ngram_jaccard(question, &t.question, 3))
        .fold(0.0, f64::max)
}

/// Generates the next question, regenerating when the candidate question's
/// token 3-gram overlap with any previous question exceeds `threshold`.
/// After `max_regen_attempts` total attempts the least-overlapping attempt
/// is accepted with a warning flag.
pub fn raise_question(
    agent: &InterviewerAgent,
    transcript: &Transcript,
    profile: &CandidateProfile,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
    threshold: f64,
) -> Result<RaisedQuestion, AgentError> {
    debug_assert!(!transcript.has_pending_question());
    let messages = assemble_question_prompt(agent, transcript, profile);
    let max_attempts = agent.prompt_config.max_regen_attempts.max(1);
    let mut best: Option<(f64, String)> = None;
    for attempt in 1..=max_attempts {
        let text = backend.complete(&messages, params)?;
        let overlap = max_overlap(&text, transcript);
        if overlap <= threshold {
            return Ok(RaisedQuestion { text, attempts: attempt, duplicate_warning: false });
        }
        if best.as_ref().is_none_or(|(b, _)| overlap < *b) {
            best = Some((overlap, text));
        }
    }
    let (_, text) = best.expect("at least one attempt");
    Ok(RaisedQuestion { text, attempts: max_attempts, duplicate_warning: true })
}

/// Generates the answer to the pending question over the full updated
/// context.
pub fn respond(
    agent: &CandidateAgent,
    transcript: &Transcript,
    posting: &JobPosting,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
) -> Result<String, AgentError> {
    if !transcript.has_pending_question() {
        return Err(AgentError::NoPendingQuestion);
    }
    let messages = assemble_response_prompt(agent, transcript, posting);
    Ok(backend.complete(&messages, params)?)
}

/// Backends for the two roles. Defaults to one shared backend; distinct
/// configurations per role are allowed.
#[derive(Clone)]
pub struct BackendPair {
    pub interviewer: Arc<dyn ChatBackend>,
    pub candidate: Arc<dyn ChatBackend>,
}

impl BackendPair {
    pub fn shared(backend: Arc<dyn ChatBackend>) -> Self {
        Self { interviewer: backend.clone(), candidate: backend }
    }
}
