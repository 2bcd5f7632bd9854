//! Blocking chat-completion client with retries and a record/replay cache.
//!
//! The request body is `{model, messages, temperature}` POSTed to
//! `{base_url}/chat/completions` with a bearer token read from the
//! environment. The reply's first choice content is returned.
//!
//! Cache file: one JSON object per line, `{key, request, response, timestamp}`.
//! The key is the SHA-256 of the canonical request JSON, so it changes with
//! the model, the temperature, and the order and content of the messages.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
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
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    #[default]
    Off,
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    /// Per-attempt timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    pub api_key_env_var: String,
    pub cache_mode: CacheMode,
    pub cache_path: Option<PathBuf>,
    /// First retry delay in milliseconds; doubles on every further retry.
    pub retry_backoff_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4".into(),
            temperature: 0.0,
            timeout: 30.0,
            max_retries: 2,
            api_key_env_var: "OPENAI_API_KEY".into(),
            cache_mode: CacheMode::Off,
            cache_path: None,
            retry_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid client configuration: {0}")]
    Config(String),
    #[error("environment variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("request timed out")]
    Timeout,
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("no cached response for request {0}")]
    CacheMiss(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cache file error: {0}")]
    Cache(#[from] std::io::Error),
}

impl ClientError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ClientError::Timeout => true,
            ClientError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    request: serde_json::Value,
    response: String,
    timestamp: u64,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Stable cache key for a request.
pub fn request_key(model: &str, temperature: f64, messages: &[ChatMessage]) -> String {
    let body = RequestBody { model, messages, temperature };
    let canonical = serde_json::to_vec(&body).expect("request serializes");
    hex::encode(Sha256::digest(&canonical))
}

pub struct LlmClient {
    config: ClientConfig,
    http: Option<reqwest::blocking::Client>,
    api_key: Option<String>,
    cache: HashMap<String, String>,
    network_calls: usize,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model_name)
            .field("cache_mode", &self.config.cache_mode)
            .field("cached", &self.cache.len())
            .finish()
    }
}

impl LlmClient {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        if !(config.timeout > 0.0 && config.timeout.is_finite()) {
            return Err(ClientError::Config("timeout must be positive".into()));
        }
        if config.cache_mode != CacheMode::Off && config.cache_path.is_none() {
            return Err(ClientError::Config("cache mode requires a cache path".into()));
        }

        let cache = match (&config.cache_mode, &config.cache_path) {
            (CacheMode::Replay, Some(path)) => load_cache(File::open(path)?)?,
            (CacheMode::Record, Some(path)) if path.exists() => load_cache(File::open(path)?)?,
            _ => HashMap::new(),
        };

        let (http, api_key) = if config.cache_mode == CacheMode::Replay {
            (None, None)
        } else {
            let key = std::env::var(&config.api_key_env_var)
                .map_err(|_| ClientError::MissingApiKey(config.api_key_env_var.clone()))?;
            let http = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs_f64(config.timeout))
                .build()
                .map_err(|e| ClientError::Transport(e.to_string()))?;
            (Some(http), Some(key))
        };

        Ok(Self { config, http, api_key, cache, network_calls: 0 })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Number of HTTP attempts made so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls
    }

    pub fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        if messages.iter().any(|m| m.content.is_empty()) {
            return Err(ClientError::Config("chat messages must not be empty".into()));
        }
        let key = request_key(&self.config.model_name, self.config.temperature, messages);
        match self.config.cache_mode {
            CacheMode::Replay => {
                return self.cache.get(&key).cloned().ok_or(ClientError::CacheMiss(key));
            }
            CacheMode::Record => {
                if let Some(hit) = self.cache.get(&key) {
                    return Ok(hit.clone());
                }
            }
            CacheMode::Off => {}
        }

        let text = self.send_with_retries(messages)?;

        if self.config.cache_mode == CacheMode::Record {
            self.append_cache(&key, messages, &text)?;
            self.cache.insert(key, text.clone());
        }
        Ok(text)
    }

    fn send_with_retries(&mut self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let mut attempt = 0;
        loop {
            match self.send_once(messages) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let delay = self.config.retry_backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("chat request failed ({e}); retry {} of {}", attempt + 1, self.config.max_retries);
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send_once(&mut self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let http = self.http.as_ref().ok_or_else(|| ClientError::Config("no HTTP client in replay mode".into()))?;
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = RequestBody { model: &self.config.model_name, messages, temperature: self.config.temperature };
        self.network_calls += 1;
        let resp =
            http.post(&url).bearer_auth(self.api_key.as_deref().unwrap_or_default()).json(&body).send().map_err(
                |e| if e.is_timeout() { ClientError::Timeout } else { ClientError::Transport(e.to_string()) },
            )?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout
            } else {
                ClientError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(ClientError::Status { status: status.as_u16(), body: text });
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| ClientError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ClientError::MalformedResponse("no choices with content".into()))
    }

    fn append_cache(&self, key: &str, messages: &[ChatMessage], response: &str) -> Result<(), ClientError> {
        let Some(path) = &self.config.cache_path else { return Ok(()) };
        let request = serde_json::to_value(RequestBody {
            model: &self.config.model_name,
            messages,
            temperature: self.config.temperature,
        })
        .map_err(|e| ClientError::MalformedResponse(e.to_string()))?;
        let entry = CacheEntry {
            key: key.to_string(),
            request,
            response: response.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(&entry).map_err(|e| ClientError::MalformedResponse(e.to_string()))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}

fn load_cache(file: File) -> Result<HashMap<String, String>, ClientError> {
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CacheEntry = serde_json::from_str(&line)
            .map_err(|e| ClientError::Cache(std::io::Error::other(format!("line {}: {e}", i + 1))))?;
        out.insert(entry.key, entry.response);
    }
    Ok(out)
}
