//! Campaign runner and its supporting machinery: ingestion with PII
//! scrubbing, pair scheduling, persistence, and report generation.

pub mod campaign;
pub mod config;
pub mod ingest;
pub mod report;

pub use campaign::{run_campaign, RunManifest};
pub use config::{AblationFlags, BackendSettings, CampaignConfig, Ordering, Pairing};
pub use ingest::{ingest, scrub_pii, PiiConfig};
pub use report::{report, ReportConfig};

use std::path::Path;

/// Writes a file atomically (write to a temp file in the same directory,
/// then rename).
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> std::io::Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, contents)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
