//! Chat-completion clients, the retry-until-parsed administration loop, and
//! a seeded mock respondent.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instrument::{
    parse_likert, Item, Language, LikertValue, Mode, ParseFailureKind, PromptText, RiasecCategory,
};

/// Schema version written into every record and manifest.
pub const FORMAT_VERSION: u32 = 1;

/// Default temperatures for the four provider families used in the study.
pub const DEFAULT_TEMPERATURES: [(&str, f64); 4] =
    [("gpt-3.5", 1.0), ("gemini-1.5", 0.9), ("ernie-3.5", 0.8), ("spark-3.5", 0.5)];

fn default_max_attempts() -> u32 {
    10
}

fn default_temperature() -> f64 {
    1.0
}

fn default_backoff_ms() -> u64 {
    500
}

/// Per-provider request settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderParams {
    /// Unique key of the provider inside a run.
    pub name: String,
    pub model_id: String,
    /// Snapshot date or release label.
    #[serde(default)]
    pub version_tag: String,
    /// Model family; providers sharing a family form a version line.
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Requests per second; `None` or 0 means unlimited.
    #[serde(default)]
    pub rate_limit: Option<f64>,
    /// First wait after a 429; doubles on each consecutive one.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl ProviderParams {
    pub fn new(name: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            model_id: model_id.into(),
            version_tag: String::new(),
            family: None,
            temperature: default_temperature(),
            max_attempts: default_max_attempts(),
            rate_limit: None,
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn family(&self) -> &str {
        self.family.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("provider name is empty".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("provider {}: temperature must be finite and >= 0", self.name));
        }
        if self.max_attempts < 1 {
            return Err(format!("provider {}: max_attempts must be >= 1", self.name));
        }
        if let Some(r) = self.rate_limit {
            if !r.is_finite() || r < 0.0 {
                return Err(format!("provider {}: rate_limit must be finite and >= 0", self.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    /// Network or server trouble; the attempt is retried.
    #[error("transport error: {0}")]
    Transport(String),
    /// Credentials rejected; the provider is abandoned.
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
}

impl ProviderError {
    pub fn is_fatal(&self) -> bool {
        matches!(self, ProviderError::Auth(_))
    }
}

/// Error that stops all remaining cells of one provider.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("provider {provider} failed: {source}")]
pub struct FatalProviderError {
    pub provider: String,
    pub source: ProviderError,
}

/// Everything a client may need for one request.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a PromptText,
    pub item: &'a Item,
    pub replication: u32,
    /// 1-based attempt number within the retry loop.
    pub attempt: u32,
}

/// A chat-completion endpoint. One request per item, no history.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>, params: &ProviderParams) -> Result<String, ProviderError>;

    /// Cheap reachability probe used by `validate`.
    fn check(&self) -> Result<(), ProviderError> {
        Ok(())
    }
}

/// Outcome of one attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Parsed { value: LikertValue },
    ParseFailure { kind: ParseFailureKind },
    TransportError { message: String },
    RateLimited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub raw_text: String,
    pub outcome: AttemptOutcome,
}

/// One administered cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdministrationRecord {
    pub format_version: u32,
    pub provider: String,
    pub model_id: String,
    pub version_tag: String,
    pub language: Language,
    pub mode: Mode,
    pub item_id: u32,
    pub replication_index: u32,
    pub attempts: Vec<Attempt>,
    /// `None` when every attempt failed.
    pub final_value: Option<LikertValue>,
    pub timestamp: String,
}

impl AdministrationRecord {
    pub fn key(&self) -> CellKey {
        CellKey {
            provider: self.provider.clone(),
            language: self.language,
            mode: self.mode,
            item_id: self.item_id,
            replication: self.replication_index,
        }
    }

    pub fn is_missing(&self) -> bool {
        self.final_value.is_none()
    }
}

/// Identity of one cell of a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub provider: String,
    pub language: Language,
    pub mode: Mode,
    pub item_id: u32,
    pub replication: u32,
}

/// Source of record timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    /// Always the Unix epoch; keeps mock runs byte-reproducible.
    Frozen,
}

impl Clock {
    pub fn now(self) -> String {
        match self {
            Clock::System => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            Clock::Frozen => "1970-01-01T00:00:00.000Z".to_string(),
        }
    }
}

/// Minimum spacing between requests.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(per_second: Option<f64>) -> Self {
        let interval = per_second.filter(|r| *r > 0.0).map(|r| Duration::from_secs_f64(1.0 / r));
        Self { interval, next: Mutex::new(Instant::now()) }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    /// Block until the next request slot.
    pub fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

/// Ask until the answer parses or `max_attempts` is used up.
///
/// Parse failures, transport errors, and rate limits each consume an attempt
/// and are recorded verbatim; exhaustion yields a record with no final value.
/// Only fatal errors are returned as `Err`.
pub fn administer_item(
    client: &dyn ChatClient,
    item: &Item,
    prompt: &PromptText,
    params: &ProviderParams,
    replication: u32,
    limiter: &RateLimiter,
    clock: Clock,
) -> Result<AdministrationRecord, FatalProviderError> {
    let mut attempts = Vec::new();
    let mut final_value = None;
    let mut backoff = Duration::from_millis(params.backoff_ms);
    for attempt in 1..=params.max_attempts.max(1) {
        limiter.acquire();
        let request = CompletionRequest { prompt, item, replication, attempt };
        match client.complete(&request, params) {
            Ok(raw) => match parse_likert(&raw, prompt.language) {
                Ok(value) => {
                    attempts.push(Attempt { raw_text: raw, outcome: AttemptOutcome::Parsed { value } });
                    final_value = Some(value);
                    break;
                }
                Err(fail) => attempts.push(Attempt {
                    raw_text: fail.raw,
                    outcome: AttemptOutcome::ParseFailure { kind: fail.kind },
                }),
            },
            Err(ProviderError::Transport(message)) => attempts.push(Attempt {
                raw_text: String::new(),
                outcome: AttemptOutcome::TransportError { message },
            }),
            Err(ProviderError::RateLimited { retry_after }) => {
                attempts.push(Attempt { raw_text: String::new(), outcome: AttemptOutcome::RateLimited });
                if attempt < params.max_attempts {
                    thread::sleep(retry_after.unwrap_or(backoff));
                    backoff = (backoff * 2).min(Duration::from_secs(60));
                }
            }
            Err(e @ ProviderError::Auth(_)) => {
                return Err(FatalProviderError { provider: params.name.clone(), source: e });
            }
        }
    }
    Ok(AdministrationRecord {
        format_version: FORMAT_VERSION,
        provider: params.name.clone(),
        model_id: params.model_id.clone(),
        version_tag: params.version_tag.clone(),
        language: prompt.language,
        mode: prompt.mode,
        item_id: item.id,
        replication_index: replication,
        attempts,
        final_value,
        timestamp: clock.now(),
    })
}

fn default_noise() -> f64 {
    0.8
}

/// Latent respondent for the mock client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentProfile {
    /// Mean response per category in R-I-A-S-E-C order, each in [1, 5].
    pub means: [f64; 6],
    /// Standard deviation of the per-response noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Probability of a refusal on any attempt, in [0, 1).
    #[serde(default)]
    pub refusal: f64,
    /// Standard deviation of a fixed per-item offset shared by all replications.
    #[serde(default)]
    pub item_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LatentProfile {
    pub fn new(means: [f64; 6], noise: f64) -> Self {
        Self { means, noise, refusal: 0.0, item_sd: 0.0, seed: 0 }
    }

    pub fn mean(&self, category: RiasecCategory) -> f64 {
        self.means[category.index()]
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(m) = self.means.iter().find(|m| !(1.0..=5.0).contains(*m)) {
            return Err(format!("profile mean {m} outside [1, 5]"));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(format!("profile noise {} must be finite and >= 0", self.noise));
        }
        if !(0.0..1.0).contains(&self.refusal) {
            return Err(format!("refusal probability {} outside [0, 1)", self.refusal));
        }
        if !self.item_sd.is_finite() || self.item_sd < 0.0 {
            return Err(format!("item_sd {} must be finite and >= 0", self.item_sd));
        }
        Ok(())
    }
}

const REFUSAL_EN: &str =
    "As an AI language model, I do not have personal feelings or preferences, so I cannot answer this question.";
const REFUSAL_ZH: &str = "作为一个人工智能语言模型，我没有个人感受或偏好，因此无法回答这个问题。";

fn refusal_text(language: Language) -> &'static str {
    match language {
        Language::English => REFUSAL_EN,
        Language::Chinese => REFUSAL_ZH,
    }
}

/// Identity of one mock draw.
#[derive(Debug, Clone, Copy)]
pub struct DrawKey<'a> {
    pub model_id: &'a str,
    pub version_tag: &'a str,
    pub item_id: u32,
    pub replication: u32,
    pub attempt: u32,
    pub mode: Mode,
    pub language: Language,
}

fn seeded_rng(parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(seed)
}

fn item_offset(profile: &LatentProfile, key: &DrawKey<'_>) -> f64 {
    if profile.item_sd == 0.0 {
        return 0.0;
    }
    let mut rng = seeded_rng(&[
        b"item",
        &profile.seed.to_le_bytes(),
        key.model_id.as_bytes(),
        key.version_tag.as_bytes(),
        &key.item_id.to_le_bytes(),
        key.mode.as_str().as_bytes(),
        key.language.code().as_bytes(),
    ]);
    let z: f64 = rng.sample(StandardNormal);
    profile.item_sd * z
}

/// The scale point the mock would give, or `None` for a refusal.
pub fn mock_value(profile: &LatentProfile, category: RiasecCategory, key: &DrawKey<'_>) -> Option<LikertValue> {
    let mut rng = seeded_rng(&[
        b"draw",
        &profile.seed.to_le_bytes(),
        key.model_id.as_bytes(),
        key.version_tag.as_bytes(),
        &key.item_id.to_le_bytes(),
        &key.replication.to_le_bytes(),
        &key.attempt.to_le_bytes(),
        key.mode.as_str().as_bytes(),
        key.language.code().as_bytes(),
    ]);
    let u: f64 = rng.random();
    if u < profile.refusal {
        return None;
    }
    let z: f64 = rng.sample(StandardNormal);
    let x = profile.mean(category) + item_offset(profile, key) + profile.noise * z;
    Some(LikertValue::nearest(x))
}

/// Raw mock text: a scale label for interest, a digit for competence, or
/// refusal boilerplate.
pub fn mock_respond(profile: &LatentProfile, item: &Item, key: &DrawKey<'_>) -> String {
    match mock_value(profile, item.category, key) {
        None => refusal_text(key.language).to_string(),
        Some(v) => match key.mode {
            Mode::Interest => v.label(key.language).to_string(),
            Mode::Competence => v.numeric().to_string(),
        },
    }
}

/// Profiles of one mock provider. Missing entries fall back: a Chinese
/// profile to the same mode's English one, competence to interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockProfiles {
    pub interest: LatentProfile,
    #[serde(default)]
    pub competence: Option<LatentProfile>,
    #[serde(default)]
    pub interest_zh: Option<LatentProfile>,
    #[serde(default)]
    pub competence_zh: Option<LatentProfile>,
}

impl MockProfiles {
    pub fn uniform(profile: LatentProfile) -> Self {
        Self { interest: profile, competence: None, interest_zh: None, competence_zh: None }
    }

    pub fn resolve(&self, mode: Mode, language: Language) -> &LatentProfile {
        let base = match mode {
            Mode::Interest => &self.interest,
            Mode::Competence => self.competence.as_ref().unwrap_or(&self.interest),
        };
        let zh = match mode {
            Mode::Interest => self.interest_zh.as_ref(),
            Mode::Competence => self.competence_zh.as_ref(),
        };
        match language {
            Language::English => base,
            Language::Chinese => zh.unwrap_or(base),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.interest.validate()?;
        for p in [&self.competence, &self.interest_zh, &self.competence_zh].into_iter().flatten() {
            p.validate()?;
        }
        Ok(())
    }

    /// Copy with every profile's seed mixed with a run seed.
    pub fn reseeded(&self, run_seed: u64) -> Self {
        let set = |p: &LatentProfile| LatentProfile {
            seed: run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ p.seed,
            ..p.clone()
        };
        Self {
            interest: set(&self.interest),
            competence: self.competence.as_ref().map(set),
            interest_zh: self.interest_zh.as_ref().map(set),
            competence_zh: self.competence_zh.as_ref().map(set),
        }
    }
}

/// Deterministic offline respondent.
#[derive(Debug, Clone)]
pub struct MockClient {
    pub profiles: MockProfiles,
}

impl MockClient {
    pub fn new(profiles: MockProfiles) -> Self {
        Self { profiles }
    }
}

impl ChatClient for MockClient {
    fn complete(&self, request: &CompletionRequest<'_>, params: &ProviderParams) -> Result<String, ProviderError> {
        let key = DrawKey {
            model_id: &params.model_id,
            version_tag: &params.version_tag,
            item_id: request.item.id,
            replication: request.replication,
            attempt: request.attempt,
            mode: request.prompt.mode,
            language: request.prompt.language,
        };
        let profile = self.profiles.resolve(request.prompt.mode, request.prompt.language);
        Ok(mock_respond(profile, request.item, &key))
    }
}

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_template() -> String {
    "Bearer {api_key}".into()
}

fn default_body_template() -> String {
    r#"{"model": {model}, "temperature": {temperature}, "messages": [{"role": "user", "content": {prompt}}]}"#.into()
}

fn default_response_pointer() -> String {
    "/choices/0/message/content".into()
}

fn default_timeout_secs() -> u64 {
    120
}

/// Endpoint adapter for a networked provider.
///
/// `body_template` is JSON with `{prompt}`, `{temperature}`, and `{model}`
/// placeholders; each is replaced by a JSON-encoded value, so placeholders
/// must stand where a JSON value is expected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub url: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    /// Header value with an `{api_key}` placeholder.
    #[serde(default = "default_auth_template")]
    pub auth_template: String,
    #[serde(default = "default_body_template")]
    pub body_template: String,
    /// JSON pointer to the reply text in the response body.
    #[serde(default = "default_response_pointer")]
    pub response_pointer: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl HttpEndpoint {
    pub fn render_body(&self, prompt: &str, temperature: f64, model: &str) -> String {
        let enc = |s: &str| serde_json::Value::String(s.to_string()).to_string();
        let temp = serde_json::Number::from_f64(temperature).map_or("null".to_string(), |n| n.to_string());
        self.body_template
            .replace("{prompt}", &enc(prompt))
            .replace("{temperature}", &temp)
            .replace("{model}", &enc(model))
    }
}

/// Generic JSON chat-completion client.
pub struct HttpClient {
    endpoint: HttpEndpoint,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpClient {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(endpoint: HttpEndpoint) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&endpoint.api_key_env)
            .map_err(|_| ProviderError::Auth(format!("environment variable {} is not set", endpoint.api_key_env)))?;
        Ok(Self::with_key(endpoint, api_key))
    }

    pub fn with_key(endpoint: HttpEndpoint, api_key: String) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .build();
        Self { endpoint, api_key, agent: config.into() }
    }

    fn send(&self, body: Option<String>) -> Result<(u16, Option<Duration>, String), ProviderError> {
        let auth = self.endpoint.auth_template.replace("{api_key}", &self.api_key);
        let result = match body {
            Some(body) => self
                .agent
                .post(&self.endpoint.url)
                .header(self.endpoint.auth_header.as_str(), auth.as_str())
                .header("Content-Type", "application/json")
                .send(body.as_str()),
            None => self.agent.get(&self.endpoint.url).header(self.endpoint.auth_header.as_str(), auth.as_str()).call(),
        };
        let mut resp = result.map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let text = resp.body_mut().read_to_string().map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok((status, retry_after, text))
    }
}

fn classify_status(status: u16, retry_after: Option<Duration>, text: &str) -> Result<(), ProviderError> {
    match status {
        200..=299 => Ok(()),
        401 | 403 => Err(ProviderError::Auth(format!("HTTP {status}: {}", snippet(text)))),
        429 => Err(ProviderError::RateLimited { retry_after }),
        _ => Err(ProviderError::Transport(format!("HTTP {status}: {}", snippet(text)))),
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

impl ChatClient for HttpClient {
    fn complete(&self, request: &CompletionRequest<'_>, params: &ProviderParams) -> Result<String, ProviderError> {
        let body = self.endpoint.render_body(&request.prompt.text(), params.temperature, &params.model_id);
        let (status, retry_after, text) = self.send(Some(body))?;
        classify_status(status, retry_after, &text)?;
        let json: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Transport(format!("response is not JSON: {e}")))?;
        match json.pointer(&self.endpoint.response_pointer) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(other) => Ok(other.to_string()),
            None => Err(ProviderError::Transport(format!(
                "response has no value at {}",
                self.endpoint.response_pointer
            ))),
        }
    }

    /// Any HTTP answer other than 401/403 counts as reachable.
    fn check(&self) -> Result<(), ProviderError> {
        let (status, _, text) = self.send(None)?;
        match status {
            401 | 403 => Err(ProviderError::Auth(format!("HTTP {status}: {}", snippet(&text)))),
            _ => Ok(()),
        }
    }
}
