//! Service side of the conversation progress guide.
//!
//! * [`gateway`]: task-agent and feedback-agent backends.
//! * [`session`]: event-sourced sessions, metrics and storage.
//! * [`http`]: JSON API and event stream.
//! * [`replay`]: offline re-evaluation of transcripts.

pub mod cli;
pub mod config;
pub mod gateway;
pub mod http;
pub mod replay;
pub mod session;
