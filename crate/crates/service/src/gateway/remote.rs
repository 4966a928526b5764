use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{BackendConfig, GatewayError};
use crate::config::ConfigError;
use cpg_core::{Message, Role};

static DIALS: AtomicU64 = AtomicU64::new(0);
static BLOCKED: AtomicU64 = AtomicU64::new(0);
static NETWORK_DENIED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkPolicy {
    Allow,
    Deny,
}

/// Process-wide switch consulted by [`HttpTransport`] before every request.
pub fn set_network_policy(policy: NetworkPolicy) {
    NETWORK_DENIED.store(policy == NetworkPolicy::Deny, Ordering::SeqCst);
}

/// Requests [`HttpTransport`] actually sent in this process.
pub fn dial_count() -> u64 {
    DIALS.load(Ordering::SeqCst)
}

/// Requests refused because the network policy was [`NetworkPolicy::Deny`].
pub fn blocked_count() -> u64 {
    BLOCKED.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("undecodable response: {0}")]
    Decode(String),
    #[error("network access is disabled")]
    Denied,
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connect(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Decode(_) | TransportError::Denied => false,
        }
    }
}

/// One JSON POST. Swapped out in tests.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::Client,
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self {
            client: reqwest::Client::new(),
        }
    }
}

#[async_trait]
impl Transport for HttpTransport {
    async fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        if NETWORK_DENIED.load(Ordering::SeqCst) {
            BLOCKED.fetch_add(1, Ordering::SeqCst);
            return Err(TransportError::Denied);
        }
        DIALS.fetch_add(1, Ordering::SeqCst);
        let response = self
            .client
            .post(url)
            .bearer_auth(api_key)
            .timeout(timeout)
            .json(body)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout
                } else {
                    TransportError::Connect(e.to_string())
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(TransportError::Status {
                status: status.as_u16(),
                body,
            });
        }
        response
            .json()
            .await
            .map_err(|e| TransportError::Decode(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(text: &str) -> Self {
        Self {
            role: "system".into(),
            content: text.into(),
        }
    }

    pub fn user(text: &str) -> Self {
        Self {
            role: "user".into(),
            content: text.into(),
        }
    }

    pub fn from_message(m: &Message) -> Self {
        let role = match m.role {
            Role::User => "user",
            Role::TaskAgent => "assistant",
            Role::System => "system",
        };
        Self {
            role: role.into(),
            content: m.text.clone(),
        }
    }
}

/// Chat-completion client with bounded, jittered retries.
///
/// The whole call, retries and back-off included, never takes longer than
/// `timeout * (max_retries + 1)`.
pub struct RemoteClient {
    pub endpoint: String,
    pub api_key_env: String,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    transport: Arc<dyn Transport>,
}

impl RemoteClient {
    pub fn new(
        endpoint: impl Into<String>,
        api_key_env: impl Into<String>,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key_env: api_key_env.into(),
            model: "gpt-4o".into(),
            timeout: Duration::from_secs(30),
            max_retries: 2,
            backoff: Duration::from_millis(250),
            transport,
        }
    }

    pub fn from_config(config: &BackendConfig, section: &'static str) -> Result<Self, ConfigError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or(ConfigError::MissingIn(section, "endpoint"))?;
        let key_env = config
            .api_key_env
            .clone()
            .ok_or(ConfigError::MissingIn(section, "api_key_env"))?;
        let mut client = Self::new(endpoint, key_env, Arc::new(HttpTransport::default()));
        if let Some(model) = &config.model {
            client.model = model.clone();
        }
        client.timeout = config.timeout();
        client.max_retries = config.max_retries;
        Ok(client)
    }

    /// Sends `messages` and returns the first choice's content.
    pub async fn chat(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        let api_key = std::env::var(&self.api_key_env)
            .map_err(|_| GatewayError::MissingApiKey(self.api_key_env.clone()))?;
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": messages,
        });
        let deadline = Instant::now() + self.timeout * (self.max_retries + 1);
        let mut attempts = 0;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(GatewayError::Timeout { attempts });
            }
            attempts += 1;
            let budget = self.timeout.min(remaining);
            let result = tokio::time::timeout(
                budget,
                self.transport.post_json(&self.endpoint, &api_key, &body, budget),
            )
            .await
            .unwrap_or(Err(TransportError::Timeout));
            let err = match result {
                Ok(value) => return extract_content(&value),
                Err(TransportError::Denied) => return Err(GatewayError::NetworkDisabled),
                Err(e) => e,
            };
            tracing::warn!(attempt = attempts, error = %err, "remote backend call failed");
            if !err.retryable() || attempts > self.max_retries {
                return Err(match err {
                    TransportError::Timeout => GatewayError::Timeout { attempts },
                    other => GatewayError::Backend(other.to_string()),
                });
            }
            let base = self.backoff.saturating_mul(1 << (attempts - 1).min(16));
            let jitter = rand::thread_rng().gen_range(0.5..1.5);
            let pause = base.mul_f64(jitter).min(deadline.saturating_duration_since(Instant::now()));
            tokio::time::sleep(pause).await;
        }
    }
}

fn extract_content(value: &Value) -> Result<String, GatewayError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::Backend("response has no choices[0].message.content".into()))
}
