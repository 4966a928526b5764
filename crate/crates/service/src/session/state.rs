use std::sync::Arc;

use thiserror::Error;

use cpg_core::engine::uses_oracle;
use cpg_core::modal::ModalError;
use cpg_core::progress::ProgressError;
use cpg_core::{advance_modal, Message, ModalPhase, ProgressState, RsaTaskState, TaskDefinition};

use super::events::{Condition, EventBody, SessionEvent, SessionStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoldError {
    #[error("event log is empty")]
    Empty,
    #[error("event log must start with session-created")]
    MissingCreated,
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("event {found} out of sequence, expected {expected}")]
    OutOfSequence { expected: u64, found: u64 },
    #[error("event belongs to session {0}")]
    ForeignEvent(String),
    #[error(transparent)]
    Progress(#[from] ProgressError),
    #[error(transparent)]
    Modal(#[from] ModalError),
}

/// Everything known about a session, derived from its events alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub id: String,
    pub task: Arc<TaskDefinition>,
    pub condition: Condition,
    pub status: SessionStatus,
    pub history: Vec<Message>,
    pub progress: ProgressState,
    pub rsa: Option<RsaTaskState>,
    pub modal: ModalPhase,
    pub started_at: i64,
    pub ended_at: Option<i64>,
    pub last_activity: i64,
    pub interaction_count: u64,
    pub next_sequence: u64,
    /// History index of the latest user message still waiting for a reply.
    pub pending: Option<usize>,
    /// `(step, timestamp)` in completion order.
    pub completions: Vec<(u32, i64)>,
}

impl SessionState {
    pub fn create(event: &SessionEvent, task: Arc<TaskDefinition>) -> Result<Self, FoldError> {
        let EventBody::SessionCreated { condition, .. } = &event.body else {
            return Err(FoldError::MissingCreated);
        };
        if event.sequence != 0 {
            return Err(FoldError::OutOfSequence {
                expected: 0,
                found: event.sequence,
            });
        }
        Ok(Self {
            id: event.session_id.clone(),
            progress: ProgressState::for_task(&task),
            rsa: uses_oracle(&task).then(RsaTaskState::default),
            task,
            condition: *condition,
            status: SessionStatus::Active,
            history: vec![],
            modal: ModalPhase::None,
            started_at: event.timestamp,
            ended_at: None,
            last_activity: event.timestamp,
            interaction_count: 0,
            next_sequence: 1,
            pending: None,
            completions: vec![],
        })
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), FoldError> {
        if event.session_id != self.id {
            return Err(FoldError::ForeignEvent(event.session_id.clone()));
        }
        if event.sequence != self.next_sequence {
            return Err(FoldError::OutOfSequence {
                expected: self.next_sequence,
                found: event.sequence,
            });
        }
        match &event.body {
            EventBody::SessionCreated { .. } => return Err(FoldError::MissingCreated),
            EventBody::UserMessage { turn_index, text } => {
                self.history
                    .push(Message::user(text.clone(), *turn_index, event.timestamp));
                self.pending = Some(self.history.len() - 1);
                self.interaction_count += 1;
            }
            EventBody::AgentMessage {
                turn_index,
                text,
                oracle,
                ..
            } => {
                self.history
                    .push(Message::agent(text.clone(), *turn_index, event.timestamp));
                self.pending = None;
                if self.rsa.is_some() {
                    self.rsa = oracle.clone();
                }
            }
            EventBody::SubtaskCompleted { step, .. } => {
                self.progress = self.progress.insert_marker(*step)?;
                self.completions.push((*step, event.timestamp));
            }
            EventBody::GoalPrompted { .. } => {
                self.progress = self.progress.record_goal_reached();
                self.modal = ModalPhase::Prompting;
            }
            EventBody::ModalChoice { choice, .. } => {
                self.modal = advance_modal(self.modal, None, Some(*choice))?;
            }
            EventBody::SessionEnded { status, .. } => {
                self.status = *status;
                self.ended_at = Some(event.timestamp);
            }
        }
        self.last_activity = event.timestamp;
        self.next_sequence += 1;
        Ok(())
    }

    /// Folds a complete log. `task_of` resolves the task id in the first event.
    pub fn rebuild(
        events: &[SessionEvent],
        task_of: impl Fn(&str) -> Option<Arc<TaskDefinition>>,
    ) -> Result<Self, FoldError> {
        let first = events.first().ok_or(FoldError::Empty)?;
        let EventBody::SessionCreated { task_id, .. } = &first.body else {
            return Err(FoldError::MissingCreated);
        };
        let task = task_of(task_id).ok_or_else(|| FoldError::UnknownTask(task_id.clone()))?;
        let mut state = Self::create(first, task)?;
        for e in &events[1..] {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn next_turn_index(&self) -> u64 {
        self.history.len() as u64
    }
}
