//! Event-sourced learning sessions.

mod clock;
mod events;
mod metrics;
mod service;
mod state;
mod store;
mod view;

pub use clock::{Clock, IdSource, ManualClock, SystemClock};
pub use events::{Condition, EventBody, SessionEvent, SessionStatus};
pub use metrics::{
    aggregate_metrics, compute_metrics, metrics_records, AggregateMetrics, MetricsFilter,
    SessionMetrics, SubtaskTiming,
};
pub use service::{
    default_system_prompt, ServiceError, SessionService, TurnOutcome, DEFAULT_IDLE_TIMEOUT_SECS,
};
pub use state::{FoldError, SessionState};
pub use store::{EventStore, JsonlStore, MemoryStore, StoreError};
pub use view::SessionView;
