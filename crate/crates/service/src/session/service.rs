use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use thiserror::Error;
use tokio::sync::{broadcast, Mutex};

use cpg_core::modal::ModalError;
use cpg_core::{advance_modal, context_window, Message, ModalChoice, ModalPhase, TaskDefinition};

use super::clock::{Clock, IdSource, SystemClock};
use super::events::{Condition, EventBody, SessionEvent, SessionStatus};
use super::metrics::{compute_metrics, SessionMetrics};
use super::state::{FoldError, SessionState};
use super::store::{EventStore, StoreError};
use super::view::SessionView;
use crate::gateway::{no_change, run_feedback_agent, FeedbackBackend, GatewayError, TaskAgent};

pub const DEFAULT_IDLE_TIMEOUT_SECS: u64 = 3600;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0} is no longer active")]
    SessionNotActive(String),
    #[error("session {0} is waiting for a continue/exit choice")]
    ModalPending(String),
    #[error(transparent)]
    Modal(#[from] ModalError),
    #[error("message text is empty")]
    EmptyMessage,
    #[error("task agent failed: {0}")]
    Backend(#[source] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("corrupt session log: {0}")]
    Fold(#[from] FoldError),
}

/// Result of one learner turn.
#[derive(Debug, Clone)]
pub struct TurnOutcome {
    pub reply: Message,
    /// Every event the turn appended, internal ones included.
    pub events: Vec<SessionEvent>,
}

type Handle = Arc<Mutex<SessionState>>;

/// Runs sessions: each call appends events to the log, then folds them into
/// the in-memory state. State is never changed any other way.
pub struct SessionService {
    tasks: BTreeMap<String, Arc<TaskDefinition>>,
    agent: TaskAgent,
    feedback: FeedbackBackend,
    store: Arc<dyn EventStore>,
    clock: Arc<dyn Clock>,
    ids: IdSource,
    idle_timeout_ms: Option<i64>,
    system_prompt: Option<String>,
    sessions: RwLock<HashMap<String, Handle>>,
    broadcaster: broadcast::Sender<SessionEvent>,
}

impl SessionService {
    pub fn new(
        tasks: Vec<TaskDefinition>,
        agent: TaskAgent,
        feedback: FeedbackBackend,
        store: Arc<dyn EventStore>,
    ) -> Self {
        Self {
            tasks: tasks
                .into_iter()
                .map(|t| (t.id.clone(), Arc::new(t)))
                .collect(),
            agent,
            feedback,
            store,
            clock: Arc::new(SystemClock),
            ids: IdSource::Random,
            idle_timeout_ms: Some(DEFAULT_IDLE_TIMEOUT_SECS as i64 * 1000),
            system_prompt: None,
            sessions: RwLock::new(HashMap::new()),
            broadcaster: broadcast::channel(1024).0,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ids(mut self, ids: IdSource) -> Self {
        self.ids = ids;
        self
    }

    /// `0` disables expiry.
    pub fn with_idle_timeout_secs(mut self, secs: u64) -> Self {
        self.idle_timeout_ms = (secs > 0).then(|| secs.min(i64::MAX as u64 / 1000) as i64 * 1000);
        self
    }

    pub fn with_system_prompt(mut self, prompt: Option<String>) -> Self {
        self.system_prompt = prompt;
        self
    }

    /// Loads every session found in the store.
    pub fn restore(&self) -> Result<usize, ServiceError> {
        let ids = self.store.session_ids()?;
        let mut sessions = self.sessions.write().unwrap();
        for id in &ids {
            let state = self.rebuild(id)?;
            sessions.insert(id.clone(), Arc::new(Mutex::new(state)));
        }
        Ok(ids.len())
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskDefinition> {
        self.tasks.values().map(|t| t.as_ref())
    }

    pub fn task(&self, id: &str) -> Option<Arc<TaskDefinition>> {
        self.tasks.get(id).cloned()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<SessionEvent> {
        self.broadcaster.subscribe()
    }

    pub fn events(&self, session_id: &str) -> Result<Vec<SessionEvent>, ServiceError> {
        self.handle(session_id)?;
        Ok(self.store.load(session_id)?)
    }

    /// Folds the stored log from scratch.
    pub fn rebuild(&self, session_id: &str) -> Result<SessionState, ServiceError> {
        let events = self.store.load(session_id)?;
        if events.is_empty() {
            return Err(ServiceError::UnknownSession(session_id.to_string()));
        }
        Ok(SessionState::rebuild(&events, |id| self.task(id))?)
    }

    /// Current in-memory state. Idle sessions are closed first.
    pub async fn state(&self, session_id: &str) -> Result<SessionState, ServiceError> {
        let handle = self.handle(session_id)?;
        let mut state = handle.lock().await;
        self.expire_if_idle(&mut state)?;
        Ok(state.clone())
    }

    pub async fn view(&self, session_id: &str) -> Result<SessionView, ServiceError> {
        Ok(SessionView::of(&self.state(session_id).await?))
    }

    pub async fn metrics(&self, session_id: &str) -> Result<SessionMetrics, ServiceError> {
        self.state(session_id).await?;
        Ok(compute_metrics(&self.store.load(session_id)?)?)
    }

    pub async fn all_metrics(&self) -> Result<Vec<SessionMetrics>, ServiceError> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        let mut out = vec![];
        for id in ids {
            out.push(self.metrics(&id).await?);
        }
        Ok(out)
    }

    pub async fn create_session(
        &self,
        task_id: &str,
        condition: Condition,
    ) -> Result<SessionView, ServiceError> {
        let task = self
            .task(task_id)
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        let id = self.ids.next_id();
        let created = SessionEvent {
            session_id: id.clone(),
            sequence: 0,
            timestamp: self.clock.now_ms(),
            body: EventBody::SessionCreated {
                task_id: task_id.to_string(),
                condition,
            },
        };
        let state = SessionState::create(&created, task)?;
        self.store.append(std::slice::from_ref(&created))?;
        let _ = self.broadcaster.send(created);
        let view = SessionView::of(&state);
        self.sessions
            .write()
            .unwrap()
            .insert(id, Arc::new(Mutex::new(state)));
        Ok(view)
    }

    /// Sends the learner's message to the task agent, judges the exchange
    /// and updates progress.
    ///
    /// If the agent fails the user message stays logged. Resubmitting the
    /// same text reuses it instead of counting a second interaction.
    pub async fn submit_turn(
        &self,
        session_id: &str,
        text: &str,
    ) -> Result<TurnOutcome, ServiceError> {
        let handle = self.handle(session_id)?;
        let mut state = handle.lock().await;
        let (idx, mut events) = self.open_question(&mut state, text)?;
        let context = context_window(&state.history[..idx]).to_vec();
        let prompt = self
            .system_prompt
            .clone()
            .unwrap_or_else(|| default_system_prompt(&state.task));
        let reply = self
            .agent
            .reply(&prompt, &context, text)
            .await
            .map_err(ServiceError::Backend)?;
        let (reply, more) = self
            .close_exchange(&mut state, idx, reply.text, reply.latency_ms)
            .await?;
        events.extend(more);
        Ok(TurnOutcome { reply, events })
    }

    /// Like [`submit_turn`](Self::submit_turn) with a known answer, for replays.
    pub async fn record_exchange(
        &self,
        session_id: &str,
        question: &str,
        answer: &str,
    ) -> Result<TurnOutcome, ServiceError> {
        let handle = self.handle(session_id)?;
        let mut state = handle.lock().await;
        let (idx, mut events) = self.open_question(&mut state, question)?;
        let (reply, more) = self
            .close_exchange(&mut state, idx, answer.to_string(), 0)
            .await?;
        events.extend(more);
        Ok(TurnOutcome { reply, events })
    }

    /// Logs a learner message without asking the agent.
    pub async fn record_user_message(
        &self,
        session_id: &str,
        text: &str,
    ) -> Result<Vec<SessionEvent>, ServiceError> {
        let handle = self.handle(session_id)?;
        let mut state = handle.lock().await;
        self.ensure_accepting(&mut state)?;
        let turn_index = state.next_turn_index();
        self.commit(
            &mut state,
            vec![EventBody::UserMessage {
                turn_index,
                text: text.to_string(),
            }],
        )
    }

    pub async fn respond_modal(
        &self,
        session_id: &str,
        choice: ModalChoice,
    ) -> Result<Vec<SessionEvent>, ServiceError> {
        let handle = self.handle(session_id)?;
        let mut state = handle.lock().await;
        self.expire_if_idle(&mut state)?;
        if state.status != SessionStatus::Active {
            return Err(ServiceError::SessionNotActive(session_id.to_string()));
        }
        advance_modal(state.modal, None, Some(choice))?;
        let mut bodies = vec![EventBody::ModalChoice {
            choice,
            automatic: false,
        }];
        if choice == ModalChoice::Exit {
            bodies.push(EventBody::SessionEnded {
                status: SessionStatus::Completed,
                reason: "exit".into(),
            });
        }
        self.commit(&mut state, bodies)
    }

    pub async fn end_session(
        &self,
        session_id: &str,
        status: SessionStatus,
        reason: &str,
    ) -> Result<Vec<SessionEvent>, ServiceError> {
        let handle = self.handle(session_id)?;
        let mut state = handle.lock().await;
        self.expire_if_idle(&mut state)?;
        if state.status != SessionStatus::Active || status == SessionStatus::Active {
            return Err(ServiceError::SessionNotActive(session_id.to_string()));
        }
        self.commit(
            &mut state,
            vec![EventBody::SessionEnded {
                status,
                reason: reason.to_string(),
            }],
        )
    }

    fn handle(&self, session_id: &str) -> Result<Handle, ServiceError> {
        self.sessions
            .read()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))
    }

    fn ensure_accepting(&self, state: &mut SessionState) -> Result<(), ServiceError> {
        self.expire_if_idle(state)?;
        if state.status != SessionStatus::Active {
            return Err(ServiceError::SessionNotActive(state.id.clone()));
        }
        if state.modal == ModalPhase::Prompting {
            return Err(ServiceError::ModalPending(state.id.clone()));
        }
        Ok(())
    }

    /// Index of the user message to answer, appending it unless it is the
    /// pending one being retried.
    fn open_question(
        &self,
        state: &mut SessionState,
        text: &str,
    ) -> Result<(usize, Vec<SessionEvent>), ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyMessage);
        }
        self.ensure_accepting(state)?;
        if let Some(idx) = state.pending.filter(|&i| state.history[i].text == text) {
            return Ok((idx, vec![]));
        }
        let turn_index = state.next_turn_index();
        let events = self.commit(
            state,
            vec![EventBody::UserMessage {
                turn_index,
                text: text.to_string(),
            }],
        )?;
        Ok((state.history.len() - 1, events))
    }

    async fn close_exchange(
        &self,
        state: &mut SessionState,
        question_idx: usize,
        answer: String,
        latency_ms: u64,
    ) -> Result<(Message, Vec<SessionEvent>), ServiceError> {
        let task = state.task.clone();
        let question = state.history[question_idx].clone();
        let turn_index = state.next_turn_index();
        let answer_msg = Message::agent(answer.clone(), turn_index, 0);
        let eval = match run_feedback_agent(
            &self.feedback,
            &question,
            &answer_msg,
            &task,
            &state.progress,
            state.rsa.as_ref(),
        )
        .await
        {
            Ok(eval) => eval,
            Err(e) => {
                tracing::warn!(session = %state.id, error = %e, "feedback agent failed, no progress recorded");
                cpg_core::engine::TurnEvaluation {
                    verdict: no_change(&task, &state.progress),
                    rsa: state.rsa.clone(),
                }
            }
        };

        let mut bodies = vec![EventBody::AgentMessage {
            turn_index,
            text: answer,
            latency_ms,
            oracle: eval.rsa.clone(),
        }];
        for &step in &eval.verdict.newly_completed {
            bodies.push(EventBody::SubtaskCompleted {
                step,
                label: task.label(step).unwrap_or_default().to_string(),
                turn_index,
            });
        }
        if advance_modal(state.modal, Some(&eval.verdict), None)? == ModalPhase::Prompting
            && state.modal != ModalPhase::Prompting
        {
            bodies.push(EventBody::GoalPrompted {
                goal_reached_count: state.progress.goal_reached_count() + 1,
                turn_index,
            });
            if state.condition == Condition::Control {
                bodies.push(EventBody::ModalChoice {
                    choice: ModalChoice::Continue,
                    automatic: true,
                });
            }
        }
        let events = self.commit(state, bodies)?;
        Ok((state.history[turn_index as usize].clone(), events))
    }

    fn expire_if_idle(&self, state: &mut SessionState) -> Result<(), ServiceError> {
        let Some(timeout) = self.idle_timeout_ms else {
            return Ok(());
        };
        if state.status == SessionStatus::Active && self.clock.now_ms() - state.last_activity > timeout {
            self.commit(
                state,
                vec![EventBody::SessionEnded {
                    status: SessionStatus::Abandoned,
                    reason: "idle-timeout".into(),
                }],
            )?;
        }
        Ok(())
    }

    /// Stamps, folds, persists and publishes a batch of events.
    fn commit(
        &self,
        state: &mut SessionState,
        bodies: Vec<EventBody>,
    ) -> Result<Vec<SessionEvent>, ServiceError> {
        let mut next = state.clone();
        let mut events = Vec::with_capacity(bodies.len());
        for body in bodies {
            let event = SessionEvent {
                session_id: state.id.clone(),
                sequence: next.next_sequence,
                timestamp: self.clock.now_ms().max(next.last_activity),
                body,
            };
            next.apply(&event)?;
            events.push(event);
        }
        self.store.append(&events)?;
        *state = next;
        for e in &events {
            let _ = self.broadcaster.send(e.clone());
        }
        Ok(events)
    }
}

pub fn default_system_prompt(task: &TaskDefinition) -> String {
    format!(
        "You are a patient tutor. The learner's goal is: {}. {} \
         Answer the learner's question directly and show concrete values when computing.",
        task.goal, task.description
    )
}
