use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ReviewMode;

/// What a provider is asked to do for one batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReviewRequest {
    pub mode: ReviewMode,
    pub prompt: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    /// The provider could not be reached or answered with an HTTP error.
    #[error("transport: {0}")]
    Transport(String),
    /// The provider answered but the payload was unusable.
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// A post-editing backend. Implementations must tolerate concurrent calls.
pub trait ReviewerProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Whether the provider accepts many cues per request. Single-cue
    /// providers get batches of one.
    fn supports_batch(&self) -> bool {
        true
    }

    fn review(&self, request: &ReviewRequest) -> Result<Vec<String>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MockFault {
    #[default]
    None,
    /// The first call returns one text too few.
    WrongCountOnce,
    /// Every call returns one text too few (or one too many for one cue).
    AlwaysWrongCount,
    Unreachable,
}

/// Deterministic offline provider: echoes texts with scripted substring
/// substitutions applied in order.
#[derive(Debug, Default)]
pub struct MockProvider {
    substitutions: Vec<(String, String)>,
    fault: MockFault,
    single_cue: bool,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn echo() -> Self {
        MockProvider::default()
    }

    pub fn with_substitutions<I, A, B>(subs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        MockProvider { substitutions: subs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(), ..Default::default() }
    }

    pub fn with_fault(mut self, fault: MockFault) -> Self {
        self.fault = fault;
        self
    }

    pub fn single_cue(mut self) -> Self {
        self.single_cue = true;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn edit(&self, text: &str) -> String {
        self.substitutions.iter().fold(text.to_string(), |t, (from, to)| t.replace(from.as_str(), to))
    }
}

impl ReviewerProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn supports_batch(&self) -> bool {
        !self.single_cue
    }

    fn review(&self, request: &ReviewRequest) -> Result<Vec<String>, ProviderError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let mut out: Vec<String> = request.texts.iter().map(|t| self.edit(t)).collect();
        let wrong = match self.fault {
            MockFault::None => false,
            MockFault::WrongCountOnce => call == 0,
            MockFault::AlwaysWrongCount => true,
            MockFault::Unreachable => return Err(ProviderError::Transport("mock provider is offline".into())),
        };
        if wrong {
            if out.len() > 1 {
                out.pop();
            } else {
                out.push(String::new());
            }
        }
        Ok(out)
    }
}

/// Settings for [`HttpProvider`], usually read from a TOML or JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpProviderConfig {
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    /// Extra attempts after a transport failure.
    pub retries: u32,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig { endpoint: None, model: "default".into(), timeout_ms: 60_000, retries: 2 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("no endpoint configured (set REVIEWER_ENDPOINT or `endpoint`)")]
    MissingEndpoint,
}

impl HttpProviderConfig {
    /// Loads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ProviderConfigError> {
        let shown = path.display().to_string();
        let raw = std::fs::read_to_string(path).map_err(|source| ProviderConfigError::Io { path: shown.clone(), source })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&raw).map_err(|e| e.to_string())
        } else {
            toml::from_str(&raw).map_err(|e| e.to_string())
        };
        parsed.map_err(|reason| ProviderConfigError::Parse { path: shown, reason })
    }
}

/// JSON-over-HTTP provider.
///
/// Request: `POST endpoint` with `{"model", "prompt", "texts": [...]}` and
/// `Authorization: Bearer $REVIEWER_API_KEY` when the key is set.
/// Response: `{"texts": [...]}`.
pub struct HttpProvider {
    cfg: HttpProviderConfig,
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    texts: Vec<String>,
}

impl HttpProvider {
    /// `REVIEWER_ENDPOINT` overrides the configured endpoint.
    pub fn from_env(cfg: HttpProviderConfig) -> Result<Self, ProviderConfigError> {
        let endpoint = std::env::var("REVIEWER_ENDPOINT")
            .ok()
            .filter(|e| !e.is_empty())
            .or_else(|| cfg.endpoint.clone())
            .ok_or(ProviderConfigError::MissingEndpoint)?;
        let api_key = std::env::var("REVIEWER_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(Self::new(cfg, endpoint, api_key))
    }

    pub fn new(cfg: HttpProviderConfig, endpoint: String, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        HttpProvider { cfg, endpoint, api_key, agent }
    }

    fn call_once(&self, request: &ReviewRequest) -> Result<Vec<String>, ProviderError> {
        let body = WireRequest { model: &self.cfg.model, prompt: &request.prompt, texts: &request.texts };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| ProviderError::Transport(e.to_string()))?;
        let parsed: WireResponse = resp.body_mut().read_json().map_err(|e| ProviderError::Malformed(e.to_string()))?;
        Ok(parsed.texts)
    }
}

impl ReviewerProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.cfg.model
    }

    fn review(&self, request: &ReviewRequest) -> Result<Vec<String>, ProviderError> {
        let mut attempt = 0;
        loop {
            match self.call_once(request) {
                Err(ProviderError::Transport(msg)) if attempt < self.cfg.retries => {
                    attempt += 1;
                    log::warn!("reviewer transport error (attempt {attempt}): {msg}");
                    std::thread::sleep(Duration::from_millis(250 * u64::from(attempt)));
                }
                other => return other,
            }
        }
    }
}
