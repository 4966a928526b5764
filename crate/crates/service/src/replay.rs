//! Offline replay of a recorded transcript through the session pipeline.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cpg_core::{ModalChoice, ModalPhase, ProgressState, TaskDefinition};

use crate::gateway::{FeedbackBackend, ScriptEntry, ScriptedDialogue, TaskAgent};
use crate::session::{
    Condition, EventBody, IdSource, ManualClock, MemoryStore, ServiceError, SessionEvent,
    SessionService, SessionState,
};

/// Replay timestamps start here and advance one second per event.
pub const REPLAY_EPOCH_MS: i64 = 1_700_000_000_000;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transcript line {line}: {message}")]
    MalformedTranscript { line: usize, message: String },
    #[error(transparent)]
    Service(#[from] ServiceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Speaker {
    User,
    TaskAgent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    pub role: Speaker,
    pub text: String,
    /// 1-based line number in the source file.
    #[serde(skip)]
    pub line: usize,
}

/// Reads JSONL `{role, text}` lines. Blank lines are skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptLine>, ReplayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut parsed: TranscriptLine =
                serde_json::from_str(l).map_err(|e| ReplayError::MalformedTranscript {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            parsed.line = i + 1;
            Ok(parsed)
        })
        .collect()
}

/// A progress change observed during replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TimelineEntry {
    pub sequence: u64,
    pub turn_index: u64,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub display_order: Vec<u32>,
    pub goal_reached_count: u32,
}

pub struct ReplayOutcome {
    pub state: SessionState,
    pub events: Vec<SessionEvent>,
    pub timeline: Vec<TimelineEntry>,
}

impl ReplayOutcome {
    pub fn timeline_jsonl(&self) -> String {
        lines(&self.timeline)
    }

    pub fn events_jsonl(&self) -> String {
        lines(&self.events)
    }
}

fn lines<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

/// Feeds every exchange of `transcript` to a fresh in-memory session using
/// the deterministic judge and a manual clock. When the completion prompt
/// opens and lines remain, the replay chooses to continue.
pub async fn replay(
    task: TaskDefinition,
    transcript: &[TranscriptLine],
) -> Result<ReplayOutcome, ReplayError> {
    let task_id = task.id.clone();
    let silent = ScriptedDialogue::new(vec![ScriptEntry {
        pattern: "*".into(),
        reply: String::new(),
    }])
    .expect("wildcard script");
    let service = SessionService::new(
        vec![task],
        TaskAgent::Scripted(silent),
        FeedbackBackend::Deterministic,
        Arc::new(MemoryStore::default()),
    )
    .with_clock(Arc::new(ManualClock::new(REPLAY_EPOCH_MS, 1000)))
    .with_ids(IdSource::sequential("replay-"))
    .with_idle_timeout_secs(0);
    let session = service.create_session(&task_id, Condition::Cpg).await?;
    let id = session.session_id;

    let mut last_question: Option<&str> = None;
    for line in transcript {
        if service.state(&id).await?.modal == ModalPhase::Prompting {
            service.respond_modal(&id, ModalChoice::Continue).await?;
        }
        match line.role {
            Speaker::User => {
                if let Some(q) = last_question.replace(&line.text) {
                    service.record_user_message(&id, q).await?;
                }
            }
            Speaker::TaskAgent => {
                let question = last_question.take().ok_or(ReplayError::MalformedTranscript {
                    line: line.line,
                    message: "task-agent reply without a preceding user message".into(),
                })?;
                service.record_exchange(&id, question, &line.text).await?;
            }
        }
    }
    if let Some(q) = last_question {
        service.record_user_message(&id, q).await?;
    }

    let events = service.events(&id)?;
    let state = service.state(&id).await?;
    let timeline = timeline(&events, state.progress.total_steps());
    Ok(ReplayOutcome {
        state,
        events,
        timeline,
    })
}

fn timeline(events: &[SessionEvent], total_steps: u32) -> Vec<TimelineEntry> {
    let mut progress = ProgressState::new(total_steps);
    let mut out = vec![];
    for e in events {
        let (kind, step, label, turn_index) = match &e.body {
            EventBody::SubtaskCompleted {
                step,
                label,
                turn_index,
            } => {
                progress = progress.insert_marker(*step).unwrap_or(progress);
                ("subtask-completed", Some(*step), Some(label.clone()), *turn_index)
            }
            EventBody::GoalPrompted { turn_index, .. } => {
                progress = progress.record_goal_reached();
                ("goal-prompted", None, None, *turn_index)
            }
            _ => continue,
        };
        out.push(TimelineEntry {
            sequence: e.sequence,
            turn_index,
            kind,
            step,
            label,
            display_order: progress.display_order().to_vec(),
            goal_reached_count: progress.goal_reached_count(),
        });
    }
    out
}
