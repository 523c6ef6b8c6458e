//! Chat-completion abstraction.
//!
//! Every LLM call in the engine flows through [`ChatBackend::complete`].
//! Two implementations ship: [`HttpBackend`] speaks the widely adopted
//! chat-completions JSON shape over HTTP POST, and [`ScriptedBackend`] is a
//! deterministic stand-in that replays configured responses for offline,
//! reproducible runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Sampling parameters passed to the model on every call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.9,
            top_p: 0.6,
            repetition_penalty: 1.1,
            max_tokens: 32_768,
            seed: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed remote response: {0}")]
    MalformedResponse(String),
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("scripted response queue exhausted and no default configured")]
    ScriptExhausted,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration error: {0}")]
    Config(String),
}

/// The single choke point for all LLM traffic.
pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError>;
}

fn check_request(messages: &[ChatMessage]) -> Result<(), BackendError> {
    if messages.is_empty() {
        return Err(BackendError::InvalidRequest("messages must be non-empty".into()));
    }
    if messages.last().map(|m| m.role) != Some(Role::User) {
        return Err(BackendError::InvalidRequest("last message must have role user".into()));
    }
    Ok(())
}

/// Stable content hash over roles and contents. Equal message lists give
/// equal fingerprints; any content or order change gives a distinct one.
pub fn fingerprint(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        hasher.update(role.as_bytes());
        hasher.update([0u8]);
        hasher.update((m.content.len() as u64).to_le_bytes());
        hasher.update(m.content.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// A scripted reply: either completion text or an injected transport error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedResponse {
    Text(String),
    Error { error: String },
}

/// A rule matched by substring against the last user message. Its responses
/// are consumed in order; `cycle` restarts from the beginning on exhaustion,
/// otherwise the last response repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub contains: String,
    pub responses: Vec<ScriptedResponse>,
    #[serde(default)]
    pub cycle: bool,
}

/// Deterministic backend configuration: identical call sequences yield
/// identical responses. Lookup order is fingerprint map, then rules, then
/// the global ordered queue, then `default_response`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedBackendConfig {
    pub responses: Vec<ScriptedResponse>,
    pub by_fingerprint: BTreeMap<String, ScriptedResponse>,
    pub rules: Vec<ScriptedRule>,
    pub default_response: Option<String>,
}

#[derive(Debug, Default)]
struct ScriptedState {
    queue_pos: usize,
    rule_pos: Vec<usize>,
    calls: u64,
}

pub struct ScriptedBackend {
    config: ScriptedBackendConfig,
    // Calls are serialized through this lock to keep queue consumption
    // deterministic under concurrent sessions.
    state: Mutex<ScriptedState>,
}

impl ScriptedBackend {
    pub fn new(config: ScriptedBackendConfig) -> Self {
        let rule_pos = vec![0; config.rules.len()];
        Self {
            config,
            state: Mutex::new(ScriptedState { rule_pos, ..Default::default() }),
        }
    }

    pub fn from_queue(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self::new(ScriptedBackendConfig {
            responses: responses.into_iter().map(|r| ScriptedResponse::Text(r.into())).collect(),
            ..Default::default()
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path.as_ref())
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.as_ref().display())))?;
        let config: ScriptedBackendConfig =
            serde_json::from_str(&raw).map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self::new(config))
    }

    pub fn call_count(&self) -> u64 {
        self.state.lock().unwrap().calls
    }

    fn resolve(&self, messages: &[ChatMessage]) -> Result<ScriptedResponse, BackendError> {
        let mut state = self.state.lock().unwrap();
        state.calls += 1;

        let fp = fingerprint(messages);
        if let Some(resp) = self.config.by_fingerprint.get(&fp) {
            return Ok(resp.clone());
        }

        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        for (idx, rule) in self.config.rules.iter().enumerate() {
            if rule.responses.is_empty() || !last_user.contains(&rule.contains) {
                continue;
            }
            let pos = state.rule_pos[idx];
            let pick = if pos < rule.responses.len() {
                state.rule_pos[idx] += 1;
                pos
            } else if rule.cycle {
                state.rule_pos[idx] = pos % rule.responses.len() + 1;
                pos % rule.responses.len()
            } else {
                rule.responses.len() - 1
            };
            return Ok(rule.responses[pick].clone());
        }

        if state.queue_pos < self.config.responses.len() {
            let resp = self.config.responses[state.queue_pos].clone();
            state.queue_pos += 1;
            return Ok(resp);
        }

        match &self.config.default_response {
            Some(text) => Ok(ScriptedResponse::Text(text.clone())),
            None => Err(BackendError::ScriptExhausted),
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        _params: &GenerationParams,
    ) -> Result<String, BackendError> {
        check_request(messages)?;
        match self.resolve(messages)? {
            ScriptedResponse::Text(text) if text.is_empty() => Err(BackendError::EmptyCompletion),
            ScriptedResponse::Text(text) => Ok(text),
            ScriptedResponse::Error { error } => {
                Err(BackendError::Transport { attempts: 1, message: error })
            }
        }
    }
}

pub const DEFAULT_API_KEY_ENV: &str = "INTERVIEWSIM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in configuration files.
    pub api_key_env: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub request_timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_retries: 3,
            initial_backoff_ms: 1000,
            request_timeout_secs: 120,
            max_in_flight: 8,
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
    }

    fn release(&self) {
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    top_p: f64,
    repetition_penalty: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: Option<String>,
}

/// Live backend with bounded retries (exponential backoff) on transient
/// transport failures and a cap on concurrent in-flight requests.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    slots: Slots,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::Config("endpoint must be set".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let slots = Slots::new(config.max_in_flight);
        Ok(Self { config, client, slots })
    }

    fn attempt(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        let body = WireRequest {
            model: &self.config.model,
            messages: messages
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    content: &m.content,
                })
                .collect(),
            temperature: params.temperature,
            top_p: params.top_p,
            repetition_penalty: params.repetition_penalty,
            max_tokens: params.max_tokens,
            seed: params.seed,
        };
        let mut request = self.client.post(&self.config.endpoint).json(&body);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| BackendError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transport {
                attempts: 1,
                message: format!("status {status}"),
            });
        }
        if !status.is_success() {
            return Err(BackendError::MalformedResponse(format!("status {status}")));
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| BackendError::MalformedResponse("no choices in response".into()))?;
        if content.is_empty() {
            return Err(BackendError::EmptyCompletion);
        }
        Ok(content)
    }
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        check_request(messages)?;
        self.slots.acquire();
        let result = (|| {
            let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
            let attempts = self.config.max_retries.max(1);
            let mut last = None;
            for attempt in 1..=attempts {
                match self.attempt(messages, params) {
                    Ok(text) => return Ok(text),
                    Err(BackendError::Transport { message, .. }) => {
                        last = Some(message);
                        if attempt < attempts {
                            std::thread::sleep(backoff);
                            backoff *= 2;
                        }
                    }
                    Err(other) => return Err(other),
                }
            }
            Err(BackendError::Transport {
                attempts,
                message: last.unwrap_or_default(),
            })
        })();
        self.slots.release();
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn msgs(content: &str) -> Vec<ChatMessage> {
        vec![ChatMessage::system("sys"), ChatMessage::user(content)]
    }

    #[test]
    fn default_params_match_reference_values() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 0.9);
        assert_eq!(p.top_p, 0.6);
        assert_eq!(p.repetition_penalty, 1.1);
        assert_eq!(p.max_tokens, 32_768);
        assert_eq!(p.seed, None);
    }

    #[test]
    fn scripted_queue_pass_through() {
        let backend = ScriptedBackend::from_queue(["hello"]);
        let out = backend.complete(&msgs("hi"), &GenerationParams::default()).unwrap();
        assert_eq!(out, "hello");
    }

    #[test]
    fn scripted_falls_back_to_default_when_exhausted() {
        let backend = ScriptedBackend::new(ScriptedBackendConfig {
            responses: vec![ScriptedResponse::Text("one".into())],
            default_response: Some("ok".into()),
            ..Default::default()
        });
        let params = GenerationParams::default();
        assert_eq!(backend.complete(&msgs("a"), &params).unwrap(), "one");
        assert_eq!(backend.complete(&msgs("b"), &params).unwrap(), "ok");
        assert_eq!(backend.call_count(), 2);
    }

    #[test]
    fn scripted_exhausted_without_default_errors() {
        let backend = ScriptedBackend::from_queue(Vec::<String>::new());
        let err = backend.complete(&msgs("a"), &GenerationParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::ScriptExhausted));
    }

    #[test]
    fn scripted_error_injection() {
        let backend = ScriptedBackend::new(ScriptedBackendConfig {
            responses: vec![
                ScriptedResponse::Text("fine".into()),
                ScriptedResponse::Error { error: "boom".into() },
            ],
            ..Default::default()
        });
        let params = GenerationParams::default();
        assert!(backend.complete(&msgs("a"), &params).is_ok());
        assert!(matches!(
            backend.complete(&msgs("b"), &params),
            Err(BackendError::Transport { .. })
        ));
    }

    #[test]
    fn scripted_rules_match_last_user_message_and_cycle() {
        let backend = ScriptedBackend::new(ScriptedBackendConfig {
            rules: vec![ScriptedRule {
                contains: "question".into(),
                responses: vec![
                    ScriptedResponse::Text("q-one".into()),
                    ScriptedResponse::Text("q-two".into()),
                ],
                cycle: true,
            }],
            default_response: Some("other".into()),
            ..Default::default()
        });
        let params = GenerationParams::default();
        assert_eq!(backend.complete(&msgs("ask a question"), &params).unwrap(), "q-one");
        assert_eq!(backend.complete(&msgs("no match"), &params).unwrap(), "other");
        assert_eq!(backend.complete(&msgs("ask a question"), &params).unwrap(), "q-two");
        assert_eq!(backend.complete(&msgs("ask a question"), &params).unwrap(), "q-one");
    }

    #[test]
    fn scripted_fingerprint_map_takes_priority() {
        let messages = msgs("hello there");
        let fp = fingerprint(&messages);
        let mut by_fingerprint = BTreeMap::new();
        by_fingerprint.insert(fp, ScriptedResponse::Text("pinned".into()));
        let backend = ScriptedBackend::new(ScriptedBackendConfig {
            responses: vec![ScriptedResponse::Text("queued".into())],
            by_fingerprint,
            ..Default::default()
        });
        assert_eq!(
            backend.complete(&messages, &GenerationParams::default()).unwrap(),
            "pinned"
        );
    }

    #[test]
    fn complete_rejects_bad_request_shapes() {
        let backend = ScriptedBackend::from_queue(["x"]);
        let params = GenerationParams::default();
        assert!(matches!(
            backend.complete(&[], &params),
            Err(BackendError::InvalidRequest(_))
        ));
        assert!(matches!(
            backend.complete(&[ChatMessage::assistant("hi")], &params),
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn fingerprint_is_deterministic_and_order_sensitive() {
        let a = vec![ChatMessage::system("s"), ChatMessage::user("u")];
        let b = vec![ChatMessage::user("u"), ChatMessage::system("s")];
        assert_eq!(fingerprint(&a), fingerprint(&a));
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }

    #[test]
    fn fingerprint_collision_check_over_small_corpus() {
        // brute force: all single-user-message prompts over a small alphabet
        let mut seen = std::collections::BTreeSet::new();
        let alphabet = ["a", "b", "ab", "ba", "aa", "a b", "a\nb", "A", "aB"];
        for content in alphabet {
            for sys in ["s1", "s2"] {
                let fp = fingerprint(&[ChatMessage::system(sys), ChatMessage::user(content)]);
                assert!(seen.insert(fp), "collision for ({sys}, {content:?})");
            }
        }
        assert_eq!(seen.len(), alphabet.len() * 2);
    }

    #[test]
    fn http_backend_unreachable_endpoint_errors_after_retries() {
        let backend = HttpBackend::new(HttpBackendConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            initial_backoff_ms: 1,
            request_timeout_secs: 2,
            ..Default::default()
        })
        .unwrap();
        let err = backend
            .complete(&msgs("hi"), &GenerationParams::default())
            .unwrap_err();
        match err {
            BackendError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected transport error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn fingerprint_separates_distinct_contents(a in ".{0,40}", b in ".{0,40}") {
            let fa = fingerprint(&[ChatMessage::user(a.clone())]);
            let fb = fingerprint(&[ChatMessage::user(b.clone())]);
            prop_assert_eq!(fa == fb, a == b);
        }
    }
}
