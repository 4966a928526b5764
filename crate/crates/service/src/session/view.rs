use serde::Serialize;

use cpg_core::{Message, ModalPhase, ProgressView};

use super::events::{Condition, SessionStatus};
use super::state::SessionState;

/// Client-facing snapshot of a session. Control sessions carry no progress
/// and no modal phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub session_id: String,
    pub task_id: String,
    pub goal: String,
    pub condition: Condition,
    pub status: SessionStatus,
    pub started_at: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<i64>,
    pub interaction_count: u64,
    pub history: Vec<Message>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progress: Option<ProgressView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modal: Option<ModalPhase>,
}

impl SessionView {
    pub fn of(state: &SessionState) -> Self {
        let cpg = state.condition == Condition::Cpg;
        Self {
            session_id: state.id.clone(),
            task_id: state.task.id.clone(),
            goal: state.task.goal.clone(),
            condition: state.condition,
            status: state.status,
            started_at: state.started_at,
            ended_at: state.ended_at,
            interaction_count: state.interaction_count,
            history: state.history.clone(),
            progress: cpg.then(|| state.progress.view(&state.task)),
            modal: cpg.then_some(state.modal),
        }
    }
}
