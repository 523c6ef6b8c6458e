//! Orchestrates one mock interview session: alternates question raising and
//! response generation for a fixed number of turns and produces a completed
//! transcript plus a replayable session log.

use serde::{Deserialize, Serialize};

use crate::agents::{
    self, CandidateAgent, InterviewerAgent, DEFAULT_DUPLICATE_THRESHOLD,
};
use crate::backend::{fingerprint, ChatBackend, GenerationParams};
use crate::domain::{StrategyOrigin, Transcript, TranscriptStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub num_turns: u32,
    pub params: GenerationParams,
    pub abort_on_backend_error: bool,
    pub duplicate_threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            num_turns: 5,
            params: GenerationParams::default(),
            abort_on_backend_error: true,
            duplicate_threshold: DEFAULT_DUPLICATE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Question,
    Answer,
}

/// One backend exchange recorded in the session log. `prompt_text` is the
/// concatenation of the prompt messages, so invariants like no-lookahead
/// and strategy origin are checkable from persisted logs alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub call_index: u32,
    pub turn: u32,
    pub kind: EventKind,
    pub fingerprint: String,
    pub prompt_text: String,
    pub completion: String,
    pub strategy_origin: StrategyOrigin,
    /// Backend calls spent on this exchange (> 1 when the diversity guard
    /// regenerated).
    pub attempts: u32,
    pub duplicate_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub interviewer_id: String,
    pub candidate_id: String,
    pub config: SessionConfig,
    pub events: Vec<SessionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub transcript: Transcript,
    pub log: SessionLog,
}

impl SessionOutcome {
    pub fn backend_calls(&self) -> u32 {
        self.log.events.iter().map(|e| e.attempts).sum()
    }
}

/// Deterministic textual rendering of a transcript, shared by all prompt
/// assembly. Empty transcripts render to the empty string.
pub fn render_context(transcript: &Transcript) -> String {
    transcript.render()
}

fn prompt_text(messages: &[crate::backend::ChatMessage]) -> String {
    messages
        .iter()
        .map(|m| m.content.as_str())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Runs one session of exactly `config.num_turns` turns. Turn i's question
/// is generated with the context of turns 1..i-1 and its answer with the
/// partial context ending at the pending question. On a backend error the
/// partial transcript is returned with status in_progress and the error
/// attached to the log (when `abort_on_backend_error`); otherwise the
/// pending question is dropped and the session closes early.
pub fn run_session(
    interviewer: &InterviewerAgent,
    candidate: &CandidateAgent,
    config: &SessionConfig,
    interviewer_backend: &dyn ChatBackend,
    candidate_backend: &dyn ChatBackend,
) -> SessionOutcome {
    let mut transcript = Transcript::new(interviewer.id.clone(), candidate.id.clone());
    let mut log = SessionLog {
        interviewer_id: interviewer.id.clone(),
        candidate_id: candidate.id.clone(),
        config: config.clone(),
        events: Vec::new(),
        error: None,
    };
    let mut call_index = 0u32;

    for turn in 1..=config.num_turns {
        let q_messages = agents::assemble_question_prompt(interviewer, &transcript, &candidate.profile);
        let raised = match agents::raise_question(
            interviewer,
            &transcript,
            &candidate.profile,
            interviewer_backend,
            &config.params,
            config.duplicate_threshold,
        ) {
            Ok(q) => q,
            Err(err) => {
                log.error = Some(err.to_string());
                return close_on_error(transcript, log, config.abort_on_backend_error);
            }
        };
        call_index += 1;
        log.events.push(SessionEvent {
            call_index,
            turn,
            kind: EventKind::Question,
            fingerprint: fingerprint(&q_messages),
            prompt_text: prompt_text(&q_messages),
            completion: raised.text.clone(),
            strategy_origin: interviewer.prompt_config.strategy.origin,
            attempts: raised.attempts,
            duplicate_warning: raised.duplicate_warning,
        });
        transcript.push_question(raised.text).expect("no pending question");

        let a_messages = agents::assemble_response_prompt(candidate, &transcript, &interviewer.posting);
        let answer = match agents::respond(
            candidate,
            &transcript,
            &interviewer.posting,
            candidate_backend,
            &config.params,
        ) {
            Ok(a) => a,
            Err(err) => {
                log.error = Some(err.to_string());
                return close_on_error(transcript, log, config.abort_on_backend_error);
            }
        };
        call_index += 1;
        log.events.push(SessionEvent {
            call_index,
            turn,
            kind: EventKind::Answer,
            fingerprint: fingerprint(&a_messages),
            prompt_text: prompt_text(&a_messages),
            completion: answer.clone(),
            strategy_origin: candidate.prompt_config.strategy.origin,
            attempts: 1,
            duplicate_warning: false,
        });
        transcript.push_answer(answer).expect("pending question");
    }

    transcript.complete().expect("all turns answered");
    SessionOutcome { transcript, log }
}

fn close_on_error(mut transcript: Transcript, log: SessionLog, abort: bool) -> SessionOutcome {
    if !abort {
        if transcript.has_pending_question() {
            transcript.turns.pop();
        }
        if !transcript.turns.is_empty() {
            transcript.status = TranscriptStatus::Completed;
        }
    }
    SessionOutcome { transcript, log }
}
