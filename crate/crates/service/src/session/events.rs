use serde::{Deserialize, Serialize};
use serde_json::Value;

use cpg_core::{ModalChoice, RsaTaskState};

/// Study arm a session belongs to. Control sessions run the same
/// evaluation but never expose progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Control,
    #[serde(alias = "experimental")]
    Cpg,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Control => "control",
            Condition::Cpg => "cpg",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "control" => Ok(Condition::Control),
            "cpg" | "experimental" => Ok(Condition::Cpg),
            other => Err(format!("unknown condition {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    Active,
    Completed,
    Abandoned,
}

/// One line of a session's append-only log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionEvent {
    pub session_id: String,
    pub sequence: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: i64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "payload",
    rename_all = "kebab-case",
    rename_all_fields = "camelCase"
)]
pub enum EventBody {
    SessionCreated {
        task_id: String,
        condition: Condition,
    },
    UserMessage {
        turn_index: u64,
        text: String,
    },
    AgentMessage {
        turn_index: u64,
        text: String,
        latency_ms: u64,
        /// RSA bindings after this exchange was judged.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle: Option<RsaTaskState>,
    },
    SubtaskCompleted {
        step: u32,
        label: String,
        turn_index: u64,
    },
    GoalPrompted {
        goal_reached_count: u32,
        turn_index: u64,
    },
    ModalChoice {
        choice: ModalChoice,
        /// Chosen by the service rather than the participant.
        automatic: bool,
    },
    SessionEnded {
        status: SessionStatus,
        reason: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::SessionCreated { .. } => "session-created",
            EventBody::UserMessage { .. } => "user-message",
            EventBody::AgentMessage { .. } => "agent-message",
            EventBody::SubtaskCompleted { .. } => "subtask-completed",
            EventBody::GoalPrompted { .. } => "goal-prompted",
            EventBody::ModalChoice { .. } => "modal-choice",
            EventBody::SessionEnded { .. } => "session-ended",
        }
    }
}

impl SessionEvent {
    /// The event as clients of a `condition` session may see it, or `None`
    /// when it must stay internal. Oracle bindings are never published.
    pub fn external(&self, condition: Condition) -> Option<Value> {
        let hidden = match &self.body {
            EventBody::SubtaskCompleted { .. } | EventBody::GoalPrompted { .. } => {
                condition == Condition::Control
            }
            EventBody::ModalChoice { automatic, .. } => *automatic,
            _ => false,
        };
        if hidden {
            return None;
        }
        let mut value = serde_json::to_value(self).expect("events serialize");
        if let Some(payload) = value.get_mut("payload").and_then(Value::as_object_mut) {
            payload.remove("oracle");
        }
        Some(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let e = SessionEvent {
            session_id: "s1".into(),
            sequence: 3,
            timestamp: 42,
            body: EventBody::SubtaskCompleted {
                step: 2,
                label: "Multiplication of Primes".into(),
                turn_index: 3,
            },
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"sessionId":"s1","sequence":3,"timestamp":42,"kind":"subtask-completed","payload":{"step":2,"label":"Multiplication of Primes","turnIndex":3}}"#
        );
        assert_eq!(serde_json::from_str::<SessionEvent>(&json).unwrap(), e);
        assert!(e.external(Condition::Control).is_none());
        assert!(e.external(Condition::Cpg).is_some());
    }

    #[test]
    fn oracle_state_is_stripped() {
        let e = SessionEvent {
            session_id: "s".into(),
            sequence: 2,
            timestamp: 0,
            body: EventBody::AgentMessage {
                turn_index: 1,
                text: "hi".into(),
                latency_ms: 5,
                oracle: Some(RsaTaskState::default()),
            },
        };
        let v = e.external(Condition::Cpg).unwrap();
        assert!(v["payload"].get("oracle").is_none());
        assert_eq!(v["payload"]["latencyMs"], 5);
    }
}
