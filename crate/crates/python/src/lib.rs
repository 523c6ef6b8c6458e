//! Python bindings for the simulation engine's core operations.

use std::collections::BTreeSet;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use interviewsim_core::agents::{create_candidate, create_interviewer, PromptTemplates};
use interviewsim_core::backend::ScriptedBackend;
use interviewsim_core::dialogue::{run_session, SessionConfig};
use interviewsim_core::domain::{CandidateProfile, JobPosting, SideEvaluation, Strategy};
use interviewsim_core::evaluation;
use interviewsim_core::harness::ingest::{scrub_pii as scrub, PiiConfig};
use interviewsim_core::metrics;
use interviewsim_core::text;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    text::tokenize(text)
}

#[pyfunction]
fn cosine_similarity(a: &str, b: &str) -> f64 {
    text::cosine_similarity(a, b)
}

#[pyfunction]
fn ngram_jaccard(a: &str, b: &str, n: usize) -> f64 {
    text::ngram_jaccard(a, b, n)
}

#[pyfunction]
#[pyo3(signature = (text, names = Vec::new()))]
fn scrub_pii(text: &str, names: Vec<String>) -> String {
    scrub(text, &PiiConfig { names })
}

#[pyfunction]
fn sigmoid(x: f64) -> f64 {
    evaluation::sigmoid(x)
}

fn side_dict<'py>(py: Python<'py>, eval: &SideEvaluation) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("document_score", eval.document_score)?;
    d.set_item("interview_score", eval.interview_score)?;
    d.set_item("weights", eval.weights)?;
    d.set_item("fused", eval.fused)?;
    d.set_item("threshold", eval.threshold)?;
    d.set_item("accept", eval.accept)?;
    Ok(d)
}

/// Fuses one side's document and interview scores (0-10 scale) into the
/// acceptance value and flag.
#[pyfunction]
#[pyo3(signature = (document_score, interview_score, w_doc = 0.5, w_int = 0.5, threshold = 0.5))]
fn fuse<'py>(
    py: Python<'py>,
    document_score: f64,
    interview_score: f64,
    w_doc: f64,
    w_int: f64,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let eval = evaluation::fuse(document_score, interview_score, (w_doc, w_int), threshold)
        .map_err(value_err)?;
    side_dict(py, &eval)
}

/// Runs both sides' fusions and the two-sided handshake; matched only when
/// both sides accept.
#[pyfunction]
#[pyo3(signature = (interviewer_scores, candidate_scores, w_doc = 0.5, w_int = 0.5, threshold = 0.5))]
fn handshake<'py>(
    py: Python<'py>,
    interviewer_scores: (f64, f64),
    candidate_scores: (f64, f64),
    w_doc: f64,
    w_int: f64,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let i = evaluation::fuse(interviewer_scores.0, interviewer_scores.1, (w_doc, w_int), threshold)
        .map_err(value_err)?;
    let c = evaluation::fuse(candidate_scores.0, candidate_scores.1, (w_doc, w_int), threshold)
        .map_err(value_err)?;
    let decision = evaluation::handshake("interviewer", "candidate", i, c);
    let d = PyDict::new(py);
    d.set_item("interviewer", side_dict(py, &decision.interviewer_eval)?)?;
    d.set_item("candidate", side_dict(py, &decision.candidate_eval)?)?;
    d.set_item("matched", decision.matched)?;
    Ok(d)
}

fn ranked_list(items: Vec<(String, f64)>, relevant: Vec<String>) -> metrics::RankedList {
    metrics::RankedList::new("q", items, relevant.into_iter().collect::<BTreeSet<_>>())
}

#[pyfunction]
fn ndcg_at_k(items: Vec<(String, f64)>, relevant: Vec<String>, k: usize) -> f64 {
    metrics::ndcg_at_k(&ranked_list(items, relevant), k)
}

#[pyfunction]
fn precision_at_k(items: Vec<(String, f64)>, relevant: Vec<String>, k: usize) -> f64 {
    metrics::precision_at_k(&ranked_list(items, relevant), k)
}

#[pyfunction]
fn recall_at_k(items: Vec<(String, f64)>, relevant: Vec<String>, k: usize) -> f64 {
    metrics::recall_at_k(&ranked_list(items, relevant), k)
}

#[pyfunction]
fn mrr_at_k(items: Vec<(String, f64)>, relevant: Vec<String>, k: usize) -> f64 {
    metrics::mrr_at_k(&ranked_list(items, relevant), k)
}

/// Per-order modified n-gram precision with brevity penalty.
#[pyfunction]
fn bleu_n(candidate: &str, reference: &str, n: usize) -> PyResult<f64> {
    if !(1..=4).contains(&n) {
        return Err(PyValueError::new_err("n must lie in 1..=4"));
    }
    Ok(metrics::bleu_n(candidate, reference, n))
}

/// Macro precision/recall/F1 over (predicted, gold) match flags.
#[pyfunction]
fn macro_prf(pairs: Vec<(bool, bool)>) -> PyResult<(f64, f64, f64)> {
    metrics::macro_prf(&pairs).map_err(value_err)
}

/// Runs a scripted interview session: questions and answers are consumed
/// from the given queues, one per turn. Returns the transcript and log
/// summary.
#[pyfunction]
#[pyo3(signature = (job_text, resume_text, questions, answers, num_turns = None))]
fn run_scripted_session<'py>(
    py: Python<'py>,
    job_text: &str,
    resume_text: &str,
    questions: Vec<String>,
    answers: Vec<String>,
    num_turns: Option<u32>,
) -> PyResult<Bound<'py, PyDict>> {
    let templates = PromptTemplates::default();
    let posting = JobPosting {
        id: "job".into(),
        description_text: job_text.into(),
        attributes: Default::default(),
    };
    let profile = CandidateProfile {
        id: "candidate".into(),
        resume_text: resume_text.into(),
        attributes: Default::default(),
    };
    let interviewer = create_interviewer(
        &posting,
        Strategy::initial(templates.initial_interviewer_strategy.clone()),
        &templates,
    )
    .map_err(value_err)?;
    let candidate = create_candidate(
        &profile,
        Strategy::initial(templates.initial_candidate_strategy.clone()),
        &templates,
    )
    .map_err(value_err)?;
    let config = SessionConfig {
        num_turns: num_turns.unwrap_or(questions.len().min(answers.len()) as u32),
        ..Default::default()
    };
    let i_backend = ScriptedBackend::from_queue(questions);
    let c_backend = ScriptedBackend::from_queue(answers);
    let outcome = run_session(&interviewer, &candidate, &config, &i_backend, &c_backend);
    let d = PyDict::new(py);
    let turns: Vec<(String, Option<String>)> = outcome
        .transcript
        .turns
        .iter()
        .map(|t| (t.question.clone(), t.answer.clone()))
        .collect();
    d.set_item("turns", turns)?;
    d.set_item("rendered", outcome.transcript.render())?;
    d.set_item("completed", outcome.transcript.is_completed())?;
    d.set_item("backend_calls", outcome.backend_calls())?;
    d.set_item("error", outcome.log.error.clone())?;
    Ok(d)
}

#[pymodule]
fn interviewsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(ngram_jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(scrub_pii, m)?)?;
    m.add_function(wrap_pyfunction!(sigmoid, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(handshake, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(mrr_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(bleu_n, m)?)?;
    m.add_function(wrap_pyfunction!(macro_prf, m)?)?;
    m.add_function(wrap_pyfunction!(run_scripted_session, m)?)?;
    Ok(())
}
