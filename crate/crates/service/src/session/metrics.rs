use serde::Serialize;

use cpg_core::analytics::report::Summary;
use cpg_core::analytics::MetricsRecord;

use super::events::{Condition, EventBody, SessionEvent, SessionStatus};
use super::state::FoldError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubtaskTiming {
    pub step: u32,
    pub timestamp: i64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionMetrics {
    pub session_id: String,
    pub task_id: String,
    pub condition: Condition,
    pub status: SessionStatus,
    /// From creation to the end of the session, or to its last event while
    /// it is still active.
    pub task_time_secs: f64,
    pub interaction_count: u64,
    pub completed: bool,
    /// Omitted for control sessions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtask_completions: Option<Vec<SubtaskTiming>>,
}

/// Metrics of one session, computed from its log alone.
pub fn compute_metrics(events: &[SessionEvent]) -> Result<SessionMetrics, FoldError> {
    let first = events.first().ok_or(FoldError::Empty)?;
    let EventBody::SessionCreated { task_id, condition } = &first.body else {
        return Err(FoldError::MissingCreated);
    };
    let start = first.timestamp;
    let mut end = start;
    let mut status = SessionStatus::Active;
    let mut interactions = 0;
    let mut completions = vec![];
    for e in events {
        end = end.max(e.timestamp);
        match &e.body {
            EventBody::UserMessage { .. } => interactions += 1,
            EventBody::SubtaskCompleted { step, .. } => completions.push(SubtaskTiming {
                step: *step,
                timestamp: e.timestamp,
                elapsed_secs: (e.timestamp - start) as f64 / 1000.0,
            }),
            EventBody::SessionEnded { status: s, .. } => {
                status = *s;
                end = e.timestamp;
                break;
            }
            _ => {}
        }
    }
    Ok(SessionMetrics {
        session_id: first.session_id.clone(),
        task_id: task_id.clone(),
        condition: *condition,
        status,
        task_time_secs: (end - start) as f64 / 1000.0,
        interaction_count: interactions,
        completed: status == SessionStatus::Completed,
        subtask_completions: (*condition == Condition::Cpg).then_some(completions),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsFilter {
    pub condition: Option<Condition>,
    pub completed_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregateMetrics {
    pub sessions: usize,
    pub completed: usize,
    pub task_time_secs: Summary,
    pub interaction_count: Summary,
}

pub fn aggregate_metrics(all: &[SessionMetrics], filter: &MetricsFilter) -> AggregateMetrics {
    let chosen: Vec<&SessionMetrics> = all
        .iter()
        .filter(|m| filter.condition.is_none_or(|c| m.condition == c))
        .filter(|m| !filter.completed_only || m.completed)
        .collect();
    let times: Vec<f64> = chosen.iter().map(|m| m.task_time_secs).collect();
    let counts: Vec<f64> = chosen.iter().map(|m| m.interaction_count as f64).collect();
    AggregateMetrics {
        sessions: chosen.len(),
        completed: chosen.iter().filter(|m| m.completed).count(),
        task_time_secs: Summary::of(&times),
        interaction_count: Summary::of(&counts),
    }
}

/// Rows in the metrics CSV read by `cpg stats --metrics`.
pub fn metrics_records(all: &[SessionMetrics]) -> Vec<MetricsRecord> {
    all.iter()
        .map(|m| MetricsRecord {
            session: m.session_id.clone(),
            condition: m.condition.as_str().to_string(),
            task_time_secs: m.task_time_secs,
            interaction_count: m.interaction_count,
            completed: m.completed,
        })
        .collect()
}
