//! Core of a conversation progress guide: a task is split into ordered
//! subtasks, each exchange with the task agent is checked against
//! declarative rules, and completed subtasks become markers on a progress bar.
//!
//! * [`domain`]: messages, task definitions, the context window.
//! * [`progress`]: the marker state machine.
//! * [`rules`] and [`engine`]: rule evaluation and verdict sanitizing.
//! * [`modal`]: the completion prompt.
//! * [`rsa`]: exact arithmetic backing the bundled RSA exercise.
//! * [`analytics`]: t-tests, effect sizes and study reports.

pub mod analytics;
pub mod builtin;
pub mod domain;
pub mod engine;
pub mod modal;
pub mod progress;
pub mod rsa;
pub mod rules;

pub use domain::{context_window, validate_task_definition, Message, Role, Subtask, TaskDefinition};
pub use engine::{evaluate_exchange, evaluate_turn, EvaluationVerdict, RawVerdict};
pub use modal::{advance_modal, ModalChoice, ModalPhase};
pub use progress::{ProgressState, ProgressView};
pub use rsa::RsaTaskState;
