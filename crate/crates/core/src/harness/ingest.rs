//! Corpus ingestion: JSON Lines parsing, PII scrubbing with typed
//! placeholders, validation, and gold label loading.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    validate_corpus, CandidateProfile, Finding, GoldLabel, GoldLabels, JobPosting, Severity,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("label references unknown ids: {0}")]
    UnknownLabelIds(String),
    #[error("corpus validation failed: {0:?}")]
    Validation(Vec<Finding>),
}

/// PII scrubbing configuration. Built-in patterns cover emails, phone
/// numbers, and national-ID-like digit runs; `names` adds a user-supplied
/// name list. Matches are replaced with typed placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiiConfig {
    pub names: Vec<String>,
}

pub fn scrub_pii(text: &str, config: &PiiConfig) -> String {
    use std::sync::OnceLock;
    static PHONE: OnceLock<regex::Regex> = OnceLock::new();
    static EMAIL: OnceLock<regex::Regex> = OnceLock::new();
    static ID_RUN: OnceLock<regex::Regex> = OnceLock::new();
    // phone first so its digit groups are not consumed as ID runs
    let phone =
        PHONE.get_or_init(|| regex::Regex::new(r"\+?\d{2,4}[- ]\d{3,4}[- ]\d{3,4}(?:[- ]\d{3,4})?").unwrap());
    let email = EMAIL
        .get_or_init(|| regex::Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").unwrap());
    let id_run = ID_RUN.get_or_init(|| regex::Regex::new(r"\d{11,18}").unwrap());
    let mut out = email.replace_all(text, "<EMAIL>").into_owned();
    out = phone.replace_all(&out, "<PHONE>").into_owned();
    out = id_run.replace_all(&out, "<ID>").into_owned();
    for name in &config.names {
        if !name.is_empty() {
            out = out.replace(name.as_str(), "<NAME>");
        }
    }
    out
}

/// On-disk resume/job record shape: {id, text, attributes{}}.
#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    text: String,
    #[serde(default)]
    attributes: std::collections::BTreeMap<String, String>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, IngestError> {
    let raw = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| IngestError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Parses the three corpus files, scrubs PII from every document, validates
/// the corpus, and checks label id referential integrity. Validation
/// findings at error severity are fatal.
pub fn ingest(
    resumes_path: impl AsRef<Path>,
    jobs_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    pii: &PiiConfig,
    slice_attributes: &[String],
) -> Result<(Vec<CandidateProfile>, Vec<JobPosting>, GoldLabels), IngestError> {
    let profiles: Vec<CandidateProfile> = read_jsonl::<CorpusRecord>(resumes_path.as_ref())?
        .into_iter()
        .map(|r| CandidateProfile {
            id: r.id,
            resume_text: scrub_pii(&r.text, pii),
            attributes: r.attributes,
        })
        .collect();
    let postings: Vec<JobPosting> = read_jsonl::<CorpusRecord>(jobs_path.as_ref())?
        .into_iter()
        .map(|r| JobPosting {
            id: r.id,
            description_text: scrub_pii(&r.text, pii),
            attributes: r.attributes,
        })
        .collect();

    let findings = validate_corpus(&profiles, &postings, slice_attributes);
    let errors: Vec<Finding> = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .cloned()
        .collect();
    if !errors.is_empty() {
        return Err(IngestError::Validation(errors));
    }

    let labels: Vec<GoldLabel> = read_jsonl(labels_path.as_ref())?;
    let mut unknown = Vec::new();
    for label in &labels {
        if !profiles.iter().any(|p| p.id == label.candidate_id) {
            unknown.push(format!("candidate {}", label.candidate_id));
        }
        if !postings.iter().any(|j| j.id == label.job_id) {
            unknown.push(format!("job {}", label.job_id));
        }
    }
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(IngestError::UnknownLabelIds(unknown.join(", ")));
    }

    Ok((profiles, postings, GoldLabels::from_iter(labels)))
}

/// Canonical JSONL serialization of a record list, used for stable digests
/// and run-directory copies.
pub fn to_canonical_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn digest(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scrub_replaces_phone_email_id_and_names() {
        let config = PiiConfig { names: vec!["Zhang Wei".into()] };
        let text = "Zhang Wei, call 138-0013-8000 or mail zw@example.com, id 110101199001011234";
        let scrubbed = scrub_pii(text, &config);
        assert_eq!(scrubbed, "<NAME>, call <PHONE> or mail <EMAIL>, id <ID>");
    }

    #[test]
    fn scrub_leaves_ordinary_text_alone() {
        let text = "Worked 5 years on Java, shipped 12 services.";
        assert_eq!(scrub_pii(text, &PiiConfig::default()), text);
    }

    fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn ingest_parses_and_scrubs() {
        let dir = tempfile::tempdir().unwrap();
        let resumes = write_lines(
            dir.path(),
            "resumes.jsonl",
            &[r#"{"id":"c1","text":"Java dev, call 138-0013-8000","attributes":{"gender":"female"}}"#],
        );
        let jobs = write_lines(
            dir.path(),
            "jobs.jsonl",
            &[r#"{"id":"j1","text":"Backend role","attributes":{}}"#],
        );
        let labels = write_lines(
            dir.path(),
            "labels.jsonl",
            &[r#"{"candidate_id":"c1","job_id":"j1","matched":true}"#],
        );
        let (profiles, postings, gold) =
            ingest(&resumes, &jobs, &labels, &PiiConfig::default(), &[]).unwrap();
        assert_eq!(profiles[0].resume_text, "Java dev, call <PHONE>");
        assert_eq!(postings.len(), 1);
        assert_eq!(gold.get("c1", "j1"), Some(true));
    }

    #[test]
    fn ingest_reports_parse_failures_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let resumes = write_lines(
            dir.path(),
            "resumes.jsonl",
            &[r#"{"id":"c1","text":"ok"}"#, "not json"],
        );
        let jobs = write_lines(dir.path(), "jobs.jsonl", &[r#"{"id":"j1","text":"ok"}"#]);
        let labels = write_lines(dir.path(), "labels.jsonl", &[]);
        let err = ingest(&resumes, &jobs, &labels, &PiiConfig::default(), &[]).unwrap_err();
        match err {
            IngestError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn ingest_rejects_labels_with_unknown_ids() {
        let dir = tempfile::tempdir().unwrap();
        let resumes = write_lines(dir.path(), "resumes.jsonl", &[r#"{"id":"c1","text":"ok"}"#]);
        let jobs = write_lines(dir.path(), "jobs.jsonl", &[r#"{"id":"j1","text":"ok"}"#]);
        let labels = write_lines(
            dir.path(),
            "labels.jsonl",
            &[r#"{"candidate_id":"ghost","job_id":"j1","matched":false}"#],
        );
        let err = ingest(&resumes, &jobs, &labels, &PiiConfig::default(), &[]).unwrap_err();
        match err {
            IngestError::UnknownLabelIds(ids) => assert!(ids.contains("ghost")),
            other => panic!("expected unknown-id error, got {other}"),
        }
    }

    #[test]
    fn digests_stable_across_round_trip() {
        let profiles = vec![CandidateProfile {
            id: "c1".into(),
            resume_text: "Java".into(),
            attributes: Default::default(),
        }];
        let jsonl = to_canonical_jsonl(&profiles);
        let reparsed: Vec<CandidateProfile> = jsonl
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(digest(&jsonl), digest(&to_canonical_jsonl(&reparsed)));
    }
}
