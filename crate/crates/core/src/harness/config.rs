//! Campaign configuration, loadable from a TOML document.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{
    BackendError, ChatBackend, HttpBackend, HttpBackendConfig, ScriptedBackend,
    DEFAULT_API_KEY_ENV,
};
use crate::dialogue::SessionConfig;
use crate::evaluation::EvalConfig;
use crate::memory::RetrievalConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Every candidate against every job.
    FullCross,
    /// Only the listed pairs, in the listed order.
    ExplicitPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// One pair at a time in a seed-shuffled order; memory feedback
    /// compounds across pairs.
    Sequential,
    /// Batches of agent-disjoint pairs run in parallel; memory updates
    /// apply between epochs.
    ParallelEpochs,
}

/// First-class ablation switches: disabling mock interviews, reflection,
/// or strategy updates each yields a complete, comparable run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub enable_interview: bool,
    pub enable_reflection: bool,
    pub enable_strategy_update: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            enable_interview: true,
            enable_reflection: true,
            enable_strategy_update: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub pairing: Pairing,
    /// (candidate_id, job_id) pairs, honored in order under explicit pairing.
    pub explicit_pairs: Vec<(String, String)>,
    pub session: SessionConfig,
    pub eval: EvalConfig,
    pub retrieval: RetrievalConfig,
    pub parallelism: usize,
    pub ordering: Ordering,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub ablation: AblationFlags,
    /// When set, memory and strategy updates stop after this fraction of
    /// the scheduled pairs (warm-then-freeze campaigns).
    pub warm_fraction: Option<f64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            pairing: Pairing::FullCross,
            explicit_pairs: Vec::new(),
            session: SessionConfig::default(),
            eval: EvalConfig::default(),
            retrieval: RetrievalConfig::default(),
            parallelism: 4,
            ordering: Ordering::Sequential,
            seed: 0,
            output_dir: PathBuf::from("run"),
            ablation: AblationFlags::default(),
            warm_fraction: None,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
}

/// Backend selection for a run, with optional per-role overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub scripted_config: Option<PathBuf>,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub interviewer: Option<Box<BackendSettings>>,
    pub candidate: Option<Box<BackendSettings>>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            scripted_config: None,
            endpoint: String::new(),
            model: String::new(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_retries: 3,
            max_in_flight: 8,
            interviewer: None,
            candidate: None,
        }
    }
}

impl BackendSettings {
    fn build_one(&self) -> Result<Arc<dyn ChatBackend>, BackendError> {
        match self.kind {
            BackendKind::Scripted => {
                let path = self.scripted_config.as_ref().ok_or_else(|| {
                    BackendError::Config("scripted backend requires scripted_config path".into())
                })?;
                Ok(Arc::new(ScriptedBackend::from_file(path)?))
            }
            BackendKind::Http => Ok(Arc::new(HttpBackend::new(HttpBackendConfig {
                endpoint: self.endpoint.clone(),
                model: self.model.clone(),
                api_key_env: self.api_key_env.clone(),
                max_retries: self.max_retries,
                max_in_flight: self.max_in_flight,
                ..Default::default()
            })?)),
        }
    }

    /// Builds (interviewer, candidate) backends; without per-role overrides
    /// both roles share one instance.
    pub fn build(
        &self,
    ) -> Result<(Arc<dyn ChatBackend>, Arc<dyn ChatBackend>), BackendError> {
        match (&self.interviewer, &self.candidate) {
            (None, None) => {
                let shared = self.build_one()?;
                Ok((shared.clone(), shared))
            }
            (i, c) => {
                let interviewer = i.as_deref().unwrap_or(self).build_one()?;
                let candidate = c.as_deref().unwrap_or(self).build_one()?;
                Ok((interviewer, candidate))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
            pairing = "full_cross"
            parallelism = 2
            seed = 42
            ordering = "sequential"
            output_dir = "out"

            [session]
            num_turns = 3

            [eval]
            accept_threshold = 0.6

            [ablation]
            enable_reflection = false
        "#;
        let config = CampaignConfig::from_toml(text).unwrap();
        assert_eq!(config.parallelism, 2);
        assert_eq!(config.seed, 42);
        assert_eq!(config.session.num_turns, 3);
        assert_eq!(config.eval.accept_threshold, 0.6);
        assert!(!config.ablation.enable_reflection);
        assert!(config.ablation.enable_interview);
    }

    #[test]
    fn scripted_settings_require_config_path() {
        let settings = BackendSettings::default();
        assert!(settings.build().is_err());
    }
}
