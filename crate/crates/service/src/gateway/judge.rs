use cpg_core::engine::{evaluate_turn, sanitize_verdict, EvaluationVerdict, TurnEvaluation};
use cpg_core::{Message, ProgressState, RawVerdict, RsaTaskState, TaskDefinition};

use super::{BackendConfig, BackendKind, ChatMessage, GatewayError, RemoteClient};
use crate::config::ConfigError;

/// Versioned prompt for a language-model judge.
pub const JUDGE_PROMPT_V1: &str = include_str!("../../assets/judge_prompt.v1.txt");

pub enum FeedbackBackend {
    /// The rule engine. Reproducible and offline.
    Deterministic,
    Remote {
        client: RemoteClient,
        template: String,
    },
}

/// A judge's answer before it is applied to the session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JudgeOutcome {
    Evaluated(TurnEvaluation),
    Raw(RawVerdict),
}

impl FeedbackBackend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, ConfigError> {
        match config.kind {
            BackendKind::Deterministic => Ok(Self::Deterministic),
            BackendKind::Remote => Ok(Self::Remote {
                client: RemoteClient::from_config(config, "feedback")?,
                template: JUDGE_PROMPT_V1.to_string(),
            }),
            BackendKind::Scripted => Err(ConfigError::Unsupported {
                section: "feedback",
                kind: "scripted",
            }),
        }
    }

    pub async fn judge(
        &self,
        question: &Message,
        answer: &Message,
        task: &TaskDefinition,
        progress: &ProgressState,
        rsa: Option<&RsaTaskState>,
    ) -> Result<JudgeOutcome, GatewayError> {
        match self {
            FeedbackBackend::Deterministic => Ok(JudgeOutcome::Evaluated(evaluate_turn(
                question, answer, task, progress, rsa,
            )?)),
            FeedbackBackend::Remote { client, template } => {
                let prompt = render_judge_prompt(template, task, progress, &question.text, &answer.text);
                let reply = client.chat(&[ChatMessage::user(&prompt)]).await?;
                Ok(JudgeOutcome::Raw(parse_judge_reply(&reply)?))
            }
        }
    }
}

pub fn render_judge_prompt(
    template: &str,
    task: &TaskDefinition,
    progress: &ProgressState,
    question: &str,
    answer: &str,
) -> String {
    let subtasks = task
        .subtasks
        .iter()
        .map(|s| format!("{}. {}", s.step, s.label))
        .collect::<Vec<_>>()
        .join("\n");
    let completed = if progress.completed_steps().is_empty() {
        "none".to_string()
    } else {
        progress
            .completed_steps()
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    };
    template
        .replace("{{goal}}", &task.goal)
        .replace("{{subtasks}}", &subtasks)
        .replace("{{completed}}", &completed)
        .replace("{{question}}", question)
        .replace("{{answer}}", answer)
}

/// Reads `{"relevant": bool, "completedSteps": [int]}`, optionally inside a
/// Markdown code fence.
pub fn parse_judge_reply(reply: &str) -> Result<RawVerdict, GatewayError> {
    let mut body = reply.trim();
    if let Some(rest) = body.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        body = rest.strip_suffix("```").unwrap_or(rest).trim();
    }
    serde_json::from_str(body).map_err(|e| GatewayError::MalformedVerdict(e.to_string()))
}

/// Judges one exchange and returns a verdict that is safe to apply.
///
/// A malformed judge reply changes nothing. Backend failures are returned.
pub async fn run_feedback_agent(
    backend: &FeedbackBackend,
    question: &Message,
    answer: &Message,
    task: &TaskDefinition,
    progress: &ProgressState,
    rsa: Option<&RsaTaskState>,
) -> Result<TurnEvaluation, GatewayError> {
    match backend.judge(question, answer, task, progress, rsa).await {
        Ok(JudgeOutcome::Evaluated(eval)) => Ok(eval),
        Ok(JudgeOutcome::Raw(raw)) => Ok(TurnEvaluation {
            verdict: sanitize_verdict(&raw, task, progress),
            rsa: rsa.cloned(),
        }),
        Err(GatewayError::MalformedVerdict(reason)) => {
            tracing::warn!(%reason, "ignoring malformed feedback verdict");
            Ok(TurnEvaluation {
                verdict: no_change(task, progress),
                rsa: rsa.cloned(),
            })
        }
        Err(e) => Err(e),
    }
}

/// Verdict for an exchange that completed nothing.
pub fn no_change(task: &TaskDefinition, progress: &ProgressState) -> EvaluationVerdict {
    sanitize_verdict(
        &RawVerdict {
            relevant: false,
            completed_steps: vec![],
        },
        task,
        progress,
    )
}
