//! Task-agent and feedback-agent backends.
//!
//! The task agent answers the learner. The feedback agent decides which
//! subtasks an exchange completed. Each has an offline implementation
//! (a scripted dialogue, the rule engine) and a remote chat-completion one.

mod judge;
mod remote;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use judge::{
    no_change, parse_judge_reply, render_judge_prompt, run_feedback_agent, FeedbackBackend, JudgeOutcome,
    JUDGE_PROMPT_V1,
};
pub use remote::{
    blocked_count, dial_count, set_network_policy, ChatMessage, HttpTransport, NetworkPolicy, RemoteClient,
    Transport, TransportError,
};
pub use scripted::{ScriptEntry, ScriptError, ScriptedDialogue};

use cpg_core::Message;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("feedback agent reply is not a verdict: {0}")]
    MalformedVerdict(String),
    #[error("network access is disabled")]
    NetworkDisabled,
    #[error(transparent)]
    Engine(#[from] cpg_core::engine::EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Remote,
    Scripted,
    Deterministic,
}

/// Backend section of the service configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub script: Option<std::path::PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

impl BackendConfig {
    pub fn scripted(path: impl Into<std::path::PathBuf>) -> Self {
        Self {
            kind: BackendKind::Scripted,
            endpoint: None,
            api_key_env: None,
            model: None,
            script: Some(path.into()),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
        }
    }

    pub fn deterministic() -> Self {
        Self {
            kind: BackendKind::Deterministic,
            script: None,
            ..Self::scripted("")
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }
}

/// What the task agent said and how long it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub text: String,
    pub latency_ms: u64,
}

pub enum TaskAgent {
    Scripted(ScriptedDialogue),
    Remote(RemoteClient),
}

impl TaskAgent {
    pub fn from_config(config: &BackendConfig) -> Result<Self, crate::config::ConfigError> {
        use crate::config::ConfigError;
        match config.kind {
            BackendKind::Scripted => {
                let path = config
                    .script
                    .as_ref()
                    .ok_or(ConfigError::Missing("task_agent.script"))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Io(path.clone(), e))?;
                Ok(Self::Scripted(ScriptedDialogue::from_json(&text)?))
            }
            BackendKind::Remote => Ok(Self::Remote(RemoteClient::from_config(
                config,
                "task_agent",
            )?)),
            BackendKind::Deterministic => Err(ConfigError::Unsupported {
                section: "task_agent",
                kind: "deterministic",
            }),
        }
    }

    /// Produces the reply to `question` given the recent `context`.
    pub async fn reply(
        &self,
        system_prompt: &str,
        context: &[Message],
        question: &str,
    ) -> Result<AgentReply, GatewayError> {
        match self {
            TaskAgent::Scripted(script) => Ok(AgentReply {
                text: script.reply(question).to_string(),
                latency_ms: 0,
            }),
            TaskAgent::Remote(client) => {
                let mut messages = vec![ChatMessage::system(system_prompt)];
                messages.extend(context.iter().map(ChatMessage::from_message));
                messages.push(ChatMessage::user(question));
                let started = std::time::Instant::now();
                let text = client.chat(&messages).await?;
                Ok(AgentReply {
                    text,
                    latency_ms: started.elapsed().as_millis() as u64,
                })
            }
        }
    }
}
