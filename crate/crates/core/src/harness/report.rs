//! Report generation: recomputes every table from the artifacts persisted
//! in a run directory, so numbers are reproducible without re-running the
//! campaign.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{CandidateProfile, GoldLabel, GoldLabels, JobPosting, MatchDecision, Side};
use crate::harness::campaign::{load_decisions, load_session_record, CampaignError, SessionRecord};
use crate::harness::write_atomic;
use crate::metrics::{
    build_rankings, corpus_bleu_n, macro_prf, mean_over_queries, mrr_at_k, ndcg_at_k,
    paired_bootstrap, precision_at_k, recall_at_k, MetricsError, RankedList,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error("unknown slice attribute: {0}")]
    UnknownSlice(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    /// Attribute names to emit per-group tables for.
    pub slices: Vec<String>,
    /// Cutoffs for the @k ranking metrics.
    pub ks: Vec<usize>,
    /// Pool n-gram counts across utterances instead of averaging per-utterance scores.
    pub bleu_micro: bool,
    /// Candidate-count prefixes for the scalability table.
    pub scalability_fractions: Vec<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            slices: Vec::new(),
            ks: vec![5],
            bleu_micro: false,
            scalability_fractions: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// Everything a report is computed from, loaded back from disk.
pub struct RunArtifacts {
    pub profiles: Vec<CandidateProfile>,
    pub postings: Vec<JobPosting>,
    pub gold: GoldLabels,
    pub decisions: Vec<MatchDecision>,
    pub sessions: Vec<SessionRecord>,
}

pub fn load_artifacts(run_dir: impl AsRef<Path>) -> Result<RunArtifacts, ReportError> {
    let run_dir = run_dir.as_ref();
    fn read_jsonl<T: serde::de::DeserializeOwned>(path: std::path::PathBuf) -> Result<Vec<T>, ReportError> {
        let raw = std::fs::read_to_string(path)?;
        raw.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(ReportError::from))
            .collect()
    }
    let profiles: Vec<CandidateProfile> = read_jsonl(run_dir.join("corpus/resumes.jsonl"))?;
    let postings: Vec<JobPosting> = read_jsonl(run_dir.join("corpus/jobs.jsonl"))?;
    let labels: Vec<GoldLabel> = read_jsonl(run_dir.join("corpus/labels.jsonl"))?;
    let decisions = load_decisions(run_dir)?;
    let mut sessions = Vec::new();
    let transcripts_dir = run_dir.join("transcripts");
    if transcripts_dir.is_dir() {
        let mut paths: Vec<_> = std::fs::read_dir(&transcripts_dir)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for path in paths {
            sessions.push(load_session_record(&path)?);
        }
    }
    Ok(RunArtifacts {
        profiles,
        postings,
        gold: GoldLabels::from_iter(labels),
        decisions,
        sessions,
    })
}

/// One table row: per-side ranking metrics at each k plus both-sides macro
/// classification metrics. `None` values render blank (empty groups).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: String,
    pub n_pairs: usize,
    /// keyed by k: (ndcg, recall, precision, mrr)
    pub candidate_side: BTreeMap<usize, (f64, f64, f64, f64)>,
    pub job_side: BTreeMap<usize, (f64, f64, f64, f64)>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
}

fn side_values(lists: &[RankedList], k: usize) -> (f64, f64, f64, f64) {
    (
        mean_over_queries(lists, k, ndcg_at_k),
        mean_over_queries(lists, k, recall_at_k),
        mean_over_queries(lists, k, precision_at_k),
        mean_over_queries(lists, k, mrr_at_k),
    )
}

/// Computes one row from a decision subset. Empty subsets yield an n=0 row
/// with no metric values.
pub fn metric_row(
    group: impl Into<String>,
    decisions: &[MatchDecision],
    gold: &GoldLabels,
    ks: &[usize],
) -> Result<MetricRow, ReportError> {
    let group = group.into();
    if decisions.is_empty() {
        return Ok(MetricRow {
            group,
            n_pairs: 0,
            candidate_side: BTreeMap::new(),
            job_side: BTreeMap::new(),
            macro_precision: None,
            macro_recall: None,
            macro_f1: None,
        });
    }
    let candidate_lists = build_rankings(decisions, gold, Side::Candidate)?;
    let job_lists = build_rankings(decisions, gold, Side::Interviewer)?;
    let mut candidate_side = BTreeMap::new();
    let mut job_side = BTreeMap::new();
    for &k in ks {
        candidate_side.insert(k, side_values(&candidate_lists, k));
        job_side.insert(k, side_values(&job_lists, k));
    }
    let pairs: Vec<(bool, bool)> = decisions
        .iter()
        .map(|d| {
            let label = gold.get(&d.candidate_id, &d.interviewer_id).ok_or_else(|| {
                MetricsError::MissingGoldLabel {
                    candidate_id: d.candidate_id.clone(),
                    job_id: d.interviewer_id.clone(),
                }
            })?;
            Ok((d.matched, label))
        })
        .collect::<Result<_, MetricsError>>()?;
    let (p, r, f1) = macro_prf(&pairs)?;
    Ok(MetricRow {
        group,
        n_pairs: decisions.len(),
        candidate_side,
        job_side,
        macro_precision: Some(p),
        macro_recall: Some(r),
        macro_f1: Some(f1),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn row_values(row: &MetricRow, ks: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for side in [&row.candidate_side, &row.job_side] {
        for &k in ks {
            match side.get(&k) {
                Some((ndcg, r, p, mrr)) => {
                    out.push(format!("{ndcg:.4}"));
                    out.push(format!("{r:.4}"));
                    out.push(format!("{p:.4}"));
                    out.push(format!("{mrr:.4}"));
                }
                None => out.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
    }
    out.push(fmt_opt(row.macro_precision));
    out.push(fmt_opt(row.macro_recall));
    out.push(fmt_opt(row.macro_f1));
    out
}

fn write_rows_csv(path: &Path, rows: &[MetricRow], ks: &[usize]) -> Result<(), ReportError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["group".to_string(), "n_pairs".to_string()];
    for side in ["candidates", "jobs"] {
        for &k in ks {
            for metric in ["ndcg", "r", "p", "mrr"] {
                header.push(format!("{side}_{metric}@{k}"));
            }
        }
    }
    header.extend(["precision".into(), "recall".into(), "f1".into()]);
    wtr.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut record = vec![row.group.clone(), row.n_pairs.to_string()];
        record.extend(row_values(row, ks));
        wtr.write_record(&record).map_err(csv_err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| csv_err(e.into_error()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

fn csv_err(e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> ReportError {
    ReportError::Io(std::io::Error::other(e))
}

fn write_rows_md(path: &Path, title: &str, rows: &[MetricRow], ks: &[usize]) -> Result<(), ReportError> {
    let per_side = ks.len() * 4;
    let mut out = format!("# {title}\n\n");
    out.push_str(&format!(
        "| |{}{} Both Sides |{}\n",
        format_args!(" Candidates |{}", " |".repeat(per_side - 1)),
        format_args!(" Jobs |{}", " |".repeat(per_side - 1)),
        " |".repeat(2),
    ));
    let mut header = String::from("| Group |");
    for _ in 0..2 {
        for &k in ks {
            header.push_str(&format!(" NDCG@{k} | R@{k} | P@{k} | MRR@{k} |"));
        }
    }
    header.push_str(" Precision | Recall | F1 |\n");
    out.push_str(&header);
    out.push_str(&format!("|---|{}\n", "---|".repeat(2 * per_side + 3)));
    for row in rows {
        out.push_str(&format!(
            "| {} (n={}) | {} |\n",
            row.group,
            row.n_pairs,
            row_values(row, ks).join(" | "),
        ));
    }
    write_atomic(path, out.as_bytes())?;
    Ok(())
}

/// Collects (utterance, resume) pairs across all sessions: questions and
/// answers are each compared against the candidate's resume.
fn bleu_pairs(
    sessions: &[SessionRecord],
    profiles: &[CandidateProfile],
) -> (Vec<(String, String)>, Vec<(String, String)>) {
    let resumes: BTreeMap<&str, &str> = profiles
        .iter()
        .map(|p| (p.id.as_str(), p.resume_text.as_str()))
        .collect();
    let mut questions = Vec::new();
    let mut answers = Vec::new();
    for s in sessions {
        let Some(resume) = resumes.get(s.candidate_id.as_str()) else {
            continue;
        };
        for turn in &s.turns {
            questions.push((turn.question.clone(), resume.to_string()));
            if let Some(answer) = &turn.answer {
                answers.push((answer.clone(), resume.to_string()));
            }
        }
    }
    (questions, answers)
}

fn decisions_for_candidates<'a>(
    decisions: &'a [MatchDecision],
    keep: &std::collections::BTreeSet<&str>,
) -> Vec<MatchDecision> {
    decisions
        .iter()
        .filter(|d| keep.contains(d.candidate_id.as_str()))
        .cloned()
        .collect()
}

/// Generates all report files under `<run_dir>/reports/`.
pub fn report(run_dir: impl AsRef<Path>, config: &ReportConfig) -> Result<(), ReportError> {
    let run_dir = run_dir.as_ref();
    let artifacts = load_artifacts(run_dir)?;
    let reports_dir = run_dir.join("reports");
    std::fs::create_dir_all(&reports_dir)?;
    let ks = &config.ks;

    let overall = metric_row("overall", &artifacts.decisions, &artifacts.gold, ks)?;
    write_rows_csv(&reports_dir.join("overall.csv"), std::slice::from_ref(&overall), ks)?;
    write_rows_md(&reports_dir.join("overall.md"), "Overall matching metrics", std::slice::from_ref(&overall), ks)?;

    for attr in &config.slices {
        let on_candidates = artifacts.profiles.iter().any(|p| p.attributes.contains_key(attr));
        let on_jobs = artifacts.postings.iter().any(|j| j.attributes.contains_key(attr));
        if !on_candidates && !on_jobs {
            return Err(ReportError::UnknownSlice(attr.clone()));
        }
        // candidate attributes take precedence when both sides carry the name
        let group_of: BTreeMap<&str, &str> = if on_candidates {
            artifacts
                .profiles
                .iter()
                .filter_map(|p| Some((p.id.as_str(), p.attributes.get(attr)?.as_str())))
                .collect()
        } else {
            artifacts
                .postings
                .iter()
                .filter_map(|j| Some((j.id.as_str(), j.attributes.get(attr)?.as_str())))
                .collect()
        };
        let mut groups: Vec<&str> = group_of.values().copied().collect();
        groups.sort();
        groups.dedup();
        let mut rows = Vec::new();
        for group in groups {
            let subset: Vec<MatchDecision> = artifacts
                .decisions
                .iter()
                .filter(|d| {
                    let key = if on_candidates { &d.candidate_id } else { &d.interviewer_id };
                    group_of.get(key.as_str()) == Some(&group)
                })
                .cloned()
                .collect();
            rows.push(metric_row(group, &subset, &artifacts.gold, ks)?);
        }
        write_rows_csv(&reports_dir.join(format!("slice_{attr}.csv")), &rows, ks)?;
        write_rows_md(
            &reports_dir.join(format!("slice_{attr}.md")),
            &format!("Metrics by {attr}"),
            &rows,
            ks,
        )?;
    }

    let (questions, answers) = bleu_pairs(&artifacts.sessions, &artifacts.profiles);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["utterances", "b@1", "b@2", "b@3", "b@4"]).map_err(csv_err)?;
    for (name, pairs) in [("questions", &questions), ("answers", &answers)] {
        let mut record = vec![name.to_string()];
        for n in 1..=4 {
            record.push(format!("{:.4}", corpus_bleu_n(pairs, n, config.bleu_micro)));
        }
        wtr.write_record(&record).map_err(csv_err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| csv_err(e.into_error()))?;
    write_atomic(reports_dir.join("bleu.csv"), &bytes)?;

    // metrics recomputed over growing candidate-count prefixes in corpus order
    let mut scalability_rows = Vec::new();
    for &fraction in &config.scalability_fractions {
        let count = ((fraction.clamp(0.0, 1.0)) * artifacts.profiles.len() as f64).round() as usize;
        let keep: std::collections::BTreeSet<&str> = artifacts
            .profiles
            .iter()
            .take(count)
            .map(|p| p.id.as_str())
            .collect();
        let subset = decisions_for_candidates(&artifacts.decisions, &keep);
        let mut row = metric_row(format!("{count}_candidates"), &subset, &artifacts.gold, ks)?;
        row.group = format!("{count}_candidates");
        scalability_rows.push(row);
    }
    write_rows_csv(&reports_dir.join("scalability.csv"), &scalability_rows, ks)?;

    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
}

/// Compares two runs with a paired bootstrap over per-query metric deltas.
/// Both runs must cover the same query sets on each side.
pub fn compare_runs(
    run_a: impl AsRef<Path>,
    run_b: impl AsRef<Path>,
    k: usize,
    resamples: usize,
    seed: u64,
) -> Result<Vec<Comparison>, ReportError> {
    let a = load_artifacts(run_a)?;
    let b = load_artifacts(run_b)?;
    let mut out = Vec::new();
    for (side, side_name) in [(Side::Candidate, "candidates"), (Side::Interviewer, "jobs")] {
        let lists_a = build_rankings(&a.decisions, &a.gold, side)?;
        let lists_b = build_rankings(&b.decisions, &b.gold, side)?;
        let by_query: BTreeMap<&str, &RankedList> =
            lists_b.iter().map(|l| (l.query_id.as_str(), l)).collect();
        for (name, metric) in [
            ("ndcg", ndcg_at_k as fn(&RankedList, usize) -> f64),
            ("r", recall_at_k),
            ("p", precision_at_k),
            ("mrr", mrr_at_k),
        ] {
            let mut values_a = Vec::new();
            let mut values_b = Vec::new();
            for list_a in &lists_a {
                if let Some(list_b) = by_query.get(list_a.query_id.as_str()) {
                    values_a.push(metric(list_a, k));
                    values_b.push(metric(list_b, k));
                }
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            out.push(Comparison {
                metric: format!("{side_name}_{name}@{k}"),
                mean_a: mean(&values_a),
                mean_b: mean(&values_b),
                p_value: paired_bootstrap(&values_a, &values_b, resamples, seed),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SideEvaluation;

    fn decision(cid: &str, jid: &str, c_fused: f64, i_fused: f64) -> MatchDecision {
        let side = |fused: f64| SideEvaluation {
            document_score: 5.0,
            interview_score: 5.0,
            weights: (0.5, 0.5),
            fused,
            threshold: 0.5,
            accept: fused >= 0.5,
            rationale: String::new(),
        };
        MatchDecision {
            interviewer_id: jid.into(),
            candidate_id: cid.into(),
            interviewer_eval: side(i_fused),
            candidate_eval: side(c_fused),
            matched: c_fused >= 0.5 && i_fused >= 0.5,
            error: None,
        }
    }

    #[test]
    fn metric_row_empty_subset_is_blank() {
        let row = metric_row("empty", &[], &GoldLabels::default(), &[5]).unwrap();
        assert_eq!(row.n_pairs, 0);
        assert!(row.candidate_side.is_empty());
        assert_eq!(row.macro_f1, None);
        let values = row_values(&row, &[5]);
        assert!(values.iter().all(|v| v.is_empty()));
    }

    #[test]
    fn metric_row_computes_both_sides() {
        let decisions = vec![
            decision("c1", "j1", 0.8, 0.8),
            decision("c1", "j2", 0.2, 0.2),
        ];
        let gold = GoldLabels::from_iter([
            GoldLabel { candidate_id: "c1".into(), job_id: "j1".into(), matched: true },
            GoldLabel { candidate_id: "c1".into(), job_id: "j2".into(), matched: false },
        ]);
        let row = metric_row("overall", &decisions, &gold, &[5]).unwrap();
        assert_eq!(row.n_pairs, 2);
        let (ndcg, r, p, mrr) = row.candidate_side[&5];
        assert_eq!((ndcg, r, mrr), (1.0, 1.0, 1.0));
        assert!((p - 0.2).abs() < 1e-12);
        assert_eq!(row.macro_f1, Some(1.0));
    }

    #[test]
    fn markdown_table_has_expected_headers() {
        let decisions = vec![decision("c1", "j1", 0.8, 0.8)];
        let gold = GoldLabels::from_iter([GoldLabel {
            candidate_id: "c1".into(),
            job_id: "j1".into(),
            matched: true,
        }]);
        let row = metric_row("overall", &decisions, &gold, &[5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("overall.md");
        write_rows_md(&path, "Overall", std::slice::from_ref(&row), &[5]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for needle in ["Candidates", "Jobs", "Both Sides", "NDCG@5", "R@5", "P@5", "MRR@5", "Precision", "Recall", "F1"] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
    }
}
