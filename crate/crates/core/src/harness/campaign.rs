//! Campaign execution: schedules (candidate, job) pairs, runs sessions and
//! two-sided evaluations, feeds matched sessions back through reflection
//! memory and strategy modification, and persists every artifact under the
//! output directory.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    create_candidate, create_interviewer, CandidateAgent, InterviewerAgent, PromptTemplates,
};
use crate::backend::{BackendError, ChatBackend, ChatMessage, GenerationParams};
use crate::dialogue::{run_session, SessionConfig, SessionEvent};
use crate::domain::{
    CandidateProfile, GoldLabel, GoldLabels, JobPosting, MatchDecision, MemoryEntry, Side,
    Strategy, Transcript, TranscriptStatus, Turn,
};
use crate::evaluation::{evaluate_pair, EvalConfig, EvalError};
use crate::harness::config::{CampaignConfig, Ordering, Pairing};
use crate::harness::ingest::{digest, to_canonical_jsonl};
use crate::harness::write_atomic;
use crate::memory;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown id in explicit pair: {0}")]
    UnknownPairId(String),
    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

/// Persisted per-session artifact: the transcript merged with its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub interviewer_id: String,
    pub candidate_id: String,
    pub turns: Vec<Turn>,
    pub status: TranscriptStatus,
    pub config: SessionConfig,
    pub events: Vec<SessionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatus {
    pub candidate_id: String,
    pub job_id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: CampaignConfig,
    pub corpus_digests: BTreeMap<String, String>,
    /// The processed order; every scheduled pair appears exactly once.
    pub pair_order: Vec<(String, String)>,
    pub pairs: Vec<PairStatus>,
    pub backend_calls: u64,
    pub elapsed_ms: u64,
}

/// Wraps a backend to count completed calls for the manifest.
struct CountingBackend<'a> {
    inner: &'a dyn ChatBackend,
    calls: AtomicU64,
}

impl<'a> CountingBackend<'a> {
    fn new(inner: &'a dyn ChatBackend) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }
}

impl ChatBackend for CountingBackend<'_> {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        self.inner.complete(messages, params)
    }
}

/// Schedules the campaign's pairs: the full cross product (corpus order)
/// or the explicit list. Sequential ordering shuffles deterministically by
/// seed; explicit pairs keep their given order.
pub fn schedule_pairs(
    profiles: &[CandidateProfile],
    postings: &[JobPosting],
    config: &CampaignConfig,
) -> Result<Vec<(String, String)>, CampaignError> {
    match config.pairing {
        Pairing::FullCross => {
            let mut pairs: Vec<(String, String)> = profiles
                .iter()
                .flat_map(|p| postings.iter().map(move |j| (p.id.clone(), j.id.clone())))
                .collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            pairs.shuffle(&mut rng);
            Ok(pairs)
        }
        Pairing::ExplicitPairs => {
            for (cid, jid) in &config.explicit_pairs {
                if !profiles.iter().any(|p| &p.id == cid) {
                    return Err(CampaignError::UnknownPairId(cid.clone()));
                }
                if !postings.iter().any(|j| &j.id == jid) {
                    return Err(CampaignError::UnknownPairId(jid.clone()));
                }
            }
            Ok(config.explicit_pairs.clone())
        }
    }
}

struct PairOutcome {
    record: Option<SessionRecord>,
    decision: Option<MatchDecision>,
    reflections: Vec<(Side, String, Strategy, Transcript, String)>,
    error: Option<String>,
}

fn session_record(
    transcript: &Transcript,
    log: crate::dialogue::SessionLog,
) -> SessionRecord {
    SessionRecord {
        interviewer_id: transcript.interviewer_id.clone(),
        candidate_id: transcript.candidate_id.clone(),
        turns: transcript.turns.clone(),
        status: transcript.status,
        config: log.config,
        events: log.events,
        error: log.error,
    }
}

/// Runs session + evaluation + reflection for one pair against agent
/// snapshots. Memory commits and strategy mutation happen in the caller so
/// they stay serialized.
#[allow(clippy::too_many_arguments)]
fn process_pair(
    interviewer: &InterviewerAgent,
    candidate: &CandidateAgent,
    eval: &EvalConfig,
    session: &SessionConfig,
    templates: &PromptTemplates,
    interviewer_backend: &dyn ChatBackend,
    candidate_backend: &dyn ChatBackend,
    enable_interview: bool,
    enable_reflection: bool,
) -> PairOutcome {
    let mut outcome = PairOutcome {
        record: None,
        decision: None,
        reflections: Vec::new(),
        error: None,
    };

    let transcript = if enable_interview {
        let result = run_session(interviewer, candidate, session, interviewer_backend, candidate_backend);
        let completed = result.transcript.is_completed();
        if let Some(err) = &result.log.error {
            outcome.error = Some(err.clone());
        }
        let transcript = result.transcript.clone();
        outcome.record = Some(session_record(&result.transcript, result.log));
        if !completed {
            return outcome;
        }
        Some(transcript)
    } else {
        None
    };

    let effective_eval = if enable_interview {
        eval.clone()
    } else {
        // the documents-only variant forces interview weights to zero
        EvalConfig {
            weights_interviewer: (1.0, 0.0),
            weights_candidate: (1.0, 0.0),
            ..eval.clone()
        }
    };
    let decision = evaluate_pair(
        interviewer,
        candidate,
        transcript.as_ref(),
        &effective_eval,
        templates,
        interviewer_backend,
        candidate_backend,
        &session.params,
    );
    if let Some(err) = &decision.error {
        outcome.error = Some(err.clone());
    }

    if decision.matched && enable_reflection {
        if let Some(t) = &transcript {
            for (side, backend, counterpart_id, counterpart_document) in [
                (
                    Side::Interviewer,
                    interviewer_backend,
                    candidate.id.clone(),
                    candidate.profile.resume_text.clone(),
                ),
                (
                    Side::Candidate,
                    candidate_backend,
                    interviewer.id.clone(),
                    interviewer.posting.description_text.clone(),
                ),
            ] {
                match memory::reflect(side, &counterpart_document, t, &decision, backend, &session.params) {
                    Ok(strategy) => outcome.reflections.push((
                        side,
                        counterpart_id,
                        strategy,
                        t.clone(),
                        counterpart_document,
                    )),
                    Err(err) => {
                        outcome.error = Some(format!("reflection ({side:?}): {err}"));
                    }
                }
            }
        }
    }

    outcome.decision = Some(decision);
    outcome
}

fn apply_feedback(
    interviewers: &mut BTreeMap<String, InterviewerAgent>,
    candidates: &mut BTreeMap<String, CandidateAgent>,
    outcome: &PairOutcome,
) {
    for (side, counterpart_id, strategy, transcript, counterpart_document) in &outcome.reflections {
        let entry = MemoryEntry {
            counterpart_id: counterpart_id.clone(),
            counterpart_document: counterpart_document.clone(),
            transcript: transcript.clone(),
            refined_strategy: strategy.clone(),
        };
        let store = match side {
            Side::Interviewer => interviewers
                .get_mut(&transcript.interviewer_id)
                .map(|a| &mut a.memory),
            Side::Candidate => candidates
                .get_mut(&transcript.candidate_id)
                .map(|a| &mut a.memory),
        };
        if let Some(store) = store {
            // side mismatch cannot occur here: entries are built per side
            let _ = memory::commit(store, entry);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn modify_before_session(
    interviewer: &mut InterviewerAgent,
    candidate: &mut CandidateAgent,
    config: &CampaignConfig,
    interviewer_backend: &dyn ChatBackend,
    candidate_backend: &dyn ChatBackend,
    notes: &mut Vec<String>,
) {
    let retrieved = memory::retrieve(&interviewer.memory, &candidate.profile.resume_text, &config.retrieval);
    let outcome = memory::modify_strategy(
        &interviewer.prompt_config,
        &retrieved,
        &candidate.profile.resume_text,
        Side::Interviewer,
        interviewer_backend,
        &config.session.params,
    );
    if let Some(err) = outcome.error {
        notes.push(format!("strategy modification (interviewer): {err}"));
    } else {
        interviewer.prompt_config = outcome.config;
    }

    let retrieved = memory::retrieve(&candidate.memory, &interviewer.posting.description_text, &config.retrieval);
    let outcome = memory::modify_strategy(
        &candidate.prompt_config,
        &retrieved,
        &interviewer.posting.description_text,
        Side::Candidate,
        candidate_backend,
        &config.session.params,
    );
    if let Some(err) = outcome.error {
        notes.push(format!("strategy modification (candidate): {err}"));
    } else {
        candidate.prompt_config = outcome.config;
    }
}

/// Groups pairs into maximal prefixes of agent-disjoint pairs for the
/// parallel-epochs ordering.
fn epochs(pairs: &[(String, String)]) -> Vec<Vec<usize>> {
    let mut result: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut used: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    for (i, (cid, jid)) in pairs.iter().enumerate() {
        if used.contains(cid.as_str()) || used.contains(jid.as_str()) {
            result.push(std::mem::take(&mut current));
            used.clear();
        }
        used.insert(cid);
        used.insert(jid);
        current.push(i);
    }
    if !current.is_empty() {
        result.push(current);
    }
    result
}

/// Runs a full campaign and persists transcripts, decisions, memories, and
/// the manifest under `config.output_dir`. Per-pair failures are recorded
/// in the manifest and skipped; the campaign itself fails only on corpus,
/// configuration, or IO errors.
pub fn run_campaign(
    profiles: &[CandidateProfile],
    postings: &[JobPosting],
    gold: &GoldLabels,
    config: &CampaignConfig,
    interviewer_backend: &dyn ChatBackend,
    candidate_backend: &dyn ChatBackend,
) -> Result<RunManifest, CampaignError> {
    let started = Instant::now();
    config.eval.validate().map_err(|e| CampaignError::Config(e.to_string()))?;
    if config.parallelism < 1 {
        return Err(CampaignError::Config("parallelism must be >= 1".into()));
    }
    let templates = PromptTemplates::default();
    let out = &config.output_dir;
    std::fs::create_dir_all(out.join("transcripts"))?;
    std::fs::create_dir_all(out.join("memory"))?;
    std::fs::create_dir_all(out.join("corpus"))?;

    // persist canonical corpus copies so reporting is a pure function of
    // the run directory
    let resumes_jsonl = to_canonical_jsonl(profiles);
    let jobs_jsonl = to_canonical_jsonl(postings);
    let gold_records: Vec<GoldLabel> = gold
        .labels
        .iter()
        .map(|((candidate_id, job_id), matched)| GoldLabel {
            candidate_id: candidate_id.clone(),
            job_id: job_id.clone(),
            matched: *matched,
        })
        .collect();
    let labels_jsonl = to_canonical_jsonl(&gold_records);
    write_atomic(out.join("corpus/resumes.jsonl"), resumes_jsonl.as_bytes())?;
    write_atomic(out.join("corpus/jobs.jsonl"), jobs_jsonl.as_bytes())?;
    write_atomic(out.join("corpus/labels.jsonl"), labels_jsonl.as_bytes())?;
    let mut corpus_digests = BTreeMap::new();
    corpus_digests.insert("resumes".to_string(), digest(&resumes_jsonl));
    corpus_digests.insert("jobs".to_string(), digest(&jobs_jsonl));
    corpus_digests.insert("labels".to_string(), digest(&labels_jsonl));

    let pairs = schedule_pairs(profiles, postings, config)?;
    let warm_limit = config
        .warm_fraction
        .map(|f| ((f.clamp(0.0, 1.0)) * pairs.len() as f64).floor() as usize)
        .unwrap_or(pairs.len());

    let mut interviewers: BTreeMap<String, InterviewerAgent> = BTreeMap::new();
    let mut candidates: BTreeMap<String, CandidateAgent> = BTreeMap::new();
    for posting in postings {
        let agent = create_interviewer(
            posting,
            Strategy::initial(templates.initial_interviewer_strategy.clone()),
            &templates,
        )
        .map_err(|e| CampaignError::Config(e.to_string()))?;
        interviewers.insert(posting.id.clone(), agent);
    }
    for profile in profiles {
        let agent = create_candidate(
            profile,
            Strategy::initial(templates.initial_candidate_strategy.clone()),
            &templates,
        )
        .map_err(|e| CampaignError::Config(e.to_string()))?;
        candidates.insert(profile.id.clone(), agent);
    }

    let i_backend = CountingBackend::new(interviewer_backend);
    let c_backend = CountingBackend::new(candidate_backend);

    let mut statuses: Vec<PairStatus> = Vec::with_capacity(pairs.len());
    let mut decisions: Vec<MatchDecision> = Vec::with_capacity(pairs.len());

    let handle_outcome = |index: usize,
                              outcome: PairOutcome,
                              notes: Vec<String>,
                              decisions: &mut Vec<MatchDecision>|
     -> Result<PairStatus, CampaignError> {
        let (cid, jid) = &pairs[index];
        if let Some(record) = &outcome.record {
            let path = config.output_dir.join(format!("transcripts/{cid}_{jid}.json"));
            write_atomic(&path, serde_json::to_string_pretty(record)?.as_bytes())?;
        }
        let matched = outcome.decision.as_ref().map(|d| d.matched);
        if let Some(decision) = outcome.decision {
            decisions.push(decision);
        }
        let mut error_parts = notes;
        if let Some(err) = outcome.error {
            error_parts.push(err);
        }
        Ok(PairStatus {
            candidate_id: cid.clone(),
            job_id: jid.clone(),
            ok: error_parts.is_empty(),
            matched,
            error: if error_parts.is_empty() {
                None
            } else {
                Some(error_parts.join("; "))
            },
        })
    };

    match config.ordering {
        Ordering::Sequential => {
            for (index, (cid, jid)) in pairs.iter().enumerate() {
                let updates_allowed = index < warm_limit;
                let mut notes = Vec::new();
                if config.ablation.enable_strategy_update && updates_allowed {
                    let mut interviewer = interviewers.remove(jid).expect("scheduled job agent");
                    let mut candidate = candidates.remove(cid).expect("scheduled candidate agent");
                    modify_before_session(
                        &mut interviewer,
                        &mut candidate,
                        config,
                        &i_backend,
                        &c_backend,
                        &mut notes,
                    );
                    interviewers.insert(jid.clone(), interviewer);
                    candidates.insert(cid.clone(), candidate);
                }
                let outcome = process_pair(
                    &interviewers[jid],
                    &candidates[cid],
                    &config.eval,
                    &config.session,
                    &templates,
                    &i_backend,
                    &c_backend,
                    config.ablation.enable_interview,
                    config.ablation.enable_reflection && updates_allowed,
                );
                apply_feedback(&mut interviewers, &mut candidates, &outcome);
                statuses.push(handle_outcome(index, outcome, notes, &mut decisions)?);
            }
        }
        Ordering::ParallelEpochs => {
            for epoch in epochs(&pairs) {
                // strategy modification stays sequential so memory reads see
                // a consistent snapshot
                let mut epoch_notes: Vec<Vec<String>> = vec![Vec::new(); epoch.len()];
                for (slot, &index) in epoch.iter().enumerate() {
                    let updates_allowed = index < warm_limit;
                    if config.ablation.enable_strategy_update && updates_allowed {
                        let (cid, jid) = &pairs[index];
                        let mut interviewer = interviewers.remove(jid).expect("scheduled job agent");
                        let mut candidate = candidates.remove(cid).expect("scheduled candidate agent");
                        modify_before_session(
                            &mut interviewer,
                            &mut candidate,
                            config,
                            &i_backend,
                            &c_backend,
                            &mut epoch_notes[slot],
                        );
                        interviewers.insert(jid.clone(), interviewer);
                        candidates.insert(cid.clone(), candidate);
                    }
                }

                let results: Mutex<Vec<(usize, PairOutcome)>> = Mutex::new(Vec::new());
                let next: AtomicU64 = AtomicU64::new(0);
                std::thread::scope(|scope| {
                    for _ in 0..config.parallelism.min(epoch.len()) {
                        scope.spawn(|| loop {
                            let slot = next.fetch_add(1, AtomicOrdering::SeqCst) as usize;
                            if slot >= epoch.len() {
                                break;
                            }
                            let index = epoch[slot];
                            let (cid, jid) = &pairs[index];
                            let outcome = process_pair(
                                &interviewers[jid],
                                &candidates[cid],
                                &config.eval,
                                &config.session,
                                &templates,
                                &i_backend,
                                &c_backend,
                                config.ablation.enable_interview,
                                config.ablation.enable_reflection && index < warm_limit,
                            );
                            results.lock().unwrap().push((slot, outcome));
                        });
                    }
                });
                let mut results = results.into_inner().unwrap();
                results.sort_by_key(|(slot, _)| *slot);
                for (slot, outcome) in results {
                    apply_feedback(&mut interviewers, &mut candidates, &outcome);
                    let notes = std::mem::take(&mut epoch_notes[slot]);
                    statuses.push(handle_outcome(epoch[slot], outcome, notes, &mut decisions)?);
                }
            }
        }
    }

    let decisions_jsonl = to_canonical_jsonl(&decisions);
    write_atomic(out.join("decisions.jsonl"), decisions_jsonl.as_bytes())?;
    for agent in interviewers.values() {
        let path = out.join(format!("memory/{}.json", agent.id));
        write_atomic(&path, serde_json::to_string_pretty(&agent.memory)?.as_bytes())?;
    }
    for agent in candidates.values() {
        let path = out.join(format!("memory/{}.json", agent.id));
        write_atomic(&path, serde_json::to_string_pretty(&agent.memory)?.as_bytes())?;
    }

    let manifest = RunManifest {
        config: config.clone(),
        corpus_digests,
        pair_order: pairs,
        pairs: statuses,
        backend_calls: i_backend.calls.load(AtomicOrdering::Relaxed)
            + c_backend.calls.load(AtomicOrdering::Relaxed),
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    write_atomic(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Loads the decisions written by a campaign.
pub fn load_decisions(run_dir: impl AsRef<Path>) -> Result<Vec<MatchDecision>, CampaignError> {
    let raw = std::fs::read_to_string(run_dir.as_ref().join("decisions.jsonl"))?;
    let mut decisions = Vec::new();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        decisions.push(serde_json::from_str(line)?);
    }
    Ok(decisions)
}

/// Loads a persisted session record.
pub fn load_session_record(path: impl AsRef<Path>) -> Result<SessionRecord, CampaignError> {
    let raw = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epochs_split_on_agent_reuse() {
        let pairs: Vec<(String, String)> = vec![
            ("c1".into(), "j1".into()),
            ("c2".into(), "j2".into()),
            ("c1".into(), "j2".into()),
            ("c2".into(), "j1".into()),
        ];
        let got = epochs(&pairs);
        assert_eq!(got, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn schedule_full_cross_is_seed_deterministic() {
        let profiles: Vec<CandidateProfile> = (0..3)
            .map(|i| CandidateProfile {
                id: format!("c{i}"),
                resume_text: "r".into(),
                attributes: Default::default(),
            })
            .collect();
        let postings: Vec<JobPosting> = (0..3)
            .map(|i| JobPosting {
                id: format!("j{i}"),
                description_text: "d".into(),
                attributes: Default::default(),
            })
            .collect();
        let config = CampaignConfig { seed: 7, ..Default::default() };
        let a = schedule_pairs(&profiles, &postings, &config).unwrap();
        let b = schedule_pairs(&profiles, &postings, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
        let other = schedule_pairs(
            &profiles,
            &postings,
            &CampaignConfig { seed: 8, ..Default::default() },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn schedule_explicit_rejects_unknown_ids() {
        let profiles = vec![CandidateProfile {
            id: "c1".into(),
            resume_text: "r".into(),
            attributes: Default::default(),
        }];
        let postings = vec![JobPosting {
            id: "j1".into(),
            description_text: "d".into(),
            attributes: Default::default(),
        }];
        let config = CampaignConfig {
            pairing: Pairing::ExplicitPairs,
            explicit_pairs: vec![("c1".into(), "missing".into())],
            ..Default::default()
        };
        assert!(matches!(
            schedule_pairs(&profiles, &postings, &config),
            Err(CampaignError::UnknownPairId(_))
        ));
    }
}
