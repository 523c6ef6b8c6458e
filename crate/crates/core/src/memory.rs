//! Reflection memory: strategy refinement on matched sessions, similarity
//! retrieval of past entries, and strategy modification feeding back into
//! prompt configs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{MemoryExcerpt, PromptConfig};
use crate::backend::{BackendError, ChatBackend, ChatMessage, GenerationParams};
use crate::domain::{MatchDecision, MemoryEntry, ReflectionMemory, Side, Strategy, Transcript};
use crate::text::cosine_similarity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub top_k: usize,
    pub min_similarity: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { top_k: 2, min_similarity: 0.1 }
    }
}

/// Similarity between a query document and a stored counterpart document.
/// The default is cosine over term-frequency vectors; embedding-based
/// similarity plugs in through this trait.
pub trait DocumentSimilarity: Send + Sync {
    fn similarity(&self, query: &str, document: &str) -> f64;
}

pub struct TokenCosine;

impl DocumentSimilarity for TokenCosine {
    fn similarity(&self, query: &str, document: &str) -> f64 {
        cosine_similarity(query, document)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("reflection requires a matched session")]
    NotMatched,
    #[error("transcript is not completed")]
    IncompleteTranscript,
    #[error("memory side mismatch: store is {store:?}, entry is {entry:?}")]
    SideMismatch { store: Side, entry: Side },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("memory persistence: {0}")]
    Persistence(String),
}

fn reflection_prompt(side: Side, counterpart_document: &str, transcript: &Transcript) -> Vec<ChatMessage> {
    let (role_line, goal_line, doc_label) = match side {
        Side::Interviewer => (
            "You are the interviewer reviewing a successful interview that ended in a mutual match.",
            "Summarize, as a refined questioning strategy, what made the questioning in this \
             interview effective for candidates with this background. Write the strategy as a \
             short imperative instruction for future interviews.",
            "Resume",
        ),
        Side::Candidate => (
            "You are the job seeker reviewing a successful interview that ended in a mutual match.",
            "Summarize, as a refined answering strategy, what made the answers in this interview \
             effective for positions like this. Write the strategy as a short imperative \
             instruction for future interviews.",
            "Job Description",
        ),
    };
    vec![
        ChatMessage::system(role_line),
        ChatMessage::user(format!(
            "{goal_line}\n\n{doc_label}:\n{counterpart_document}\n\nInterview Dialogue Context:\n{}",
            transcript.render()
        )),
    ]
}

/// Refines the questioning (or answering) strategy from a matched session.
/// Callable only for sessions whose decision is matched; unmatched sessions
/// keep the initial strategy.
pub fn reflect(
    side: Side,
    counterpart_document: &str,
    transcript: &Transcript,
    decision: &MatchDecision,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
) -> Result<Strategy, MemoryError> {
    if !decision.matched {
        return Err(MemoryError::NotMatched);
    }
    if !transcript.is_completed() {
        return Err(MemoryError::IncompleteTranscript);
    }
    let messages = reflection_prompt(side, counterpart_document, transcript);
    let text = backend.complete(&messages, params)?;
    Ok(Strategy::refined(
        text,
        transcript.interviewer_id.clone(),
        transcript.candidate_id.clone(),
    ))
}

/// Adds an entry to the store; an existing entry for the same counterpart is
/// replaced (latest wins), so memory grows by at most one.
pub fn commit(memory: &mut ReflectionMemory, entry: MemoryEntry) -> Result<(), MemoryError> {
    let entry_side = match memory.side {
        Side::Interviewer if entry.counterpart_id == entry.transcript.candidate_id => Side::Interviewer,
        Side::Candidate if entry.counterpart_id == entry.transcript.interviewer_id => Side::Candidate,
        _ => {
            let entry_side = if entry.counterpart_id == entry.transcript.interviewer_id {
                Side::Candidate
            } else {
                Side::Interviewer
            };
            return Err(MemoryError::SideMismatch { store: memory.side, entry: entry_side });
        }
    };
    debug_assert_eq!(entry_side, memory.side);
    if let Some(existing) = memory
        .entries
        .iter_mut()
        .find(|e| e.counterpart_id == entry.counterpart_id)
    {
        *existing = entry;
    } else {
        memory.entries.push(entry);
    }
    Ok(())
}

/// Ranks entries by similarity of their counterpart documents to the query
/// document, drops those below `min_similarity`, and returns the top_k.
/// Ties break by counterpart_id ascending.
pub fn retrieve<'a>(
    memory: &'a ReflectionMemory,
    query_document: &str,
    config: &RetrievalConfig,
) -> Vec<&'a MemoryEntry> {
    retrieve_with(memory, query_document, config, &TokenCosine)
}

pub fn retrieve_with<'a>(
    memory: &'a ReflectionMemory,
    query_document: &str,
    config: &RetrievalConfig,
    similarity: &dyn DocumentSimilarity,
) -> Vec<&'a MemoryEntry> {
    let mut scored: Vec<(f64, &MemoryEntry)> = memory
        .entries
        .iter()
        .map(|e| (similarity.similarity(query_document, &e.counterpart_document), e))
        .filter(|(s, _)| *s >= config.min_similarity)
        .collect();
    scored.sort_by(|(sa, ea), (sb, eb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ea.counterpart_id.cmp(&eb.counterpart_id))
    });
    scored.into_iter().take(config.top_k).map(|(_, e)| e).collect()
}

/// Question (or answer) lines from a retrieved transcript, attached to the
/// agent's prompt as reference material.
pub fn excerpt(entry: &MemoryEntry, side: Side) -> MemoryExcerpt {
    let lines = entry
        .transcript
        .turns
        .iter()
        .filter_map(|t| match side {
            Side::Interviewer => Some(format!("Q{}: {}", t.index, t.question)),
            Side::Candidate => t.answer.as_ref().map(|a| format!("A{}: {}", t.index, a)),
        })
        .collect();
    MemoryExcerpt { counterpart_id: entry.counterpart_id.clone(), lines }
}

/// The outcome of a strategy modification attempt. On a backend failure the
/// config comes back unchanged with the failure recorded.
#[derive(Debug, Clone)]
pub struct ModifyOutcome {
    pub config: PromptConfig,
    pub error: Option<String>,
}

fn modification_prompt(
    side: Side,
    current: &Strategy,
    retrieved: &[&MemoryEntry],
    query_document: &str,
) -> Vec<ChatMessage> {
    let (role_line, task_line, doc_label) = match side {
        Side::Interviewer => (
            "You are an interviewer preparing for an upcoming interview.",
            "Rewrite the current questioning strategy so it targets this candidate's specific \
             skills and experience, drawing on the refined strategies from past matched \
             interviews below. Reply with the rewritten strategy only.",
            "Resume of the upcoming candidate",
        ),
        Side::Candidate => (
            "You are a job seeker preparing for an upcoming interview.",
            "Rewrite the current answering strategy so it targets this position's specific \
             requirements, drawing on the refined strategies from past matched interviews \
             below. Reply with the rewritten strategy only.",
            "Job description of the upcoming position",
        ),
    };
    let mut user = format!("{task_line}\n\nCurrent strategy:\n{}", current.text);
    for entry in retrieved {
        user.push_str(&format!(
            "\n\nRefined strategy from the matched interview with {}:\n{}",
            entry.counterpart_id, entry.refined_strategy.text
        ));
    }
    user.push_str(&format!("\n\n{doc_label}:\n{query_document}"));
    vec![ChatMessage::system(role_line), ChatMessage::user(user)]
}

/// Rewrites the strategy in `current` using the retrieved entries' refined
/// strategies and the new counterpart document, and attaches transcript
/// excerpts from the retrieved sessions. With nothing retrieved the config
/// is returned unchanged.
pub fn modify_strategy(
    current: &PromptConfig,
    retrieved: &[&MemoryEntry],
    query_document: &str,
    side: Side,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
) -> ModifyOutcome {
    if retrieved.is_empty() {
        return ModifyOutcome { config: current.clone(), error: None };
    }
    let messages = modification_prompt(side, &current.strategy, retrieved, query_document);
    match backend.complete(&messages, params) {
        Ok(text) => {
            let source = retrieved[0];
            let mut config = current.clone();
            config.strategy = Strategy::refined(
                text,
                source.transcript.interviewer_id.clone(),
                source.transcript.candidate_id.clone(),
            );
            config.retrieved_examples = retrieved.iter().map(|e| excerpt(e, side)).collect();
            ModifyOutcome { config, error: None }
        }
        Err(err) => ModifyOutcome { config: current.clone(), error: Some(err.to_string()) },
    }
}

/// Persists one owner's memory as JSON; reload restores identical retrieval
/// behavior.
pub fn save(memory: &ReflectionMemory, path: impl AsRef<Path>) -> Result<(), MemoryError> {
    let json = serde_json::to_string_pretty(memory)
        .map_err(|e| MemoryError::Persistence(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| MemoryError::Persistence(e.to_string()))
}

pub fn load(path: impl AsRef<Path>) -> Result<ReflectionMemory, MemoryError> {
    let raw = std::fs::read_to_string(path).map_err(|e| MemoryError::Persistence(e.to_string()))?;
    serde_json::from_str(&raw).map_err(|e| MemoryError::Persistence(e.to_string()))
}
