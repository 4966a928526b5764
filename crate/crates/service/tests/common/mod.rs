#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use cpg_service::gateway::{FeedbackBackend, ScriptedDialogue, TaskAgent};
use cpg_service::session::{EventStore, IdSource, ManualClock, MemoryStore, SessionService};

pub const START_MS: i64 = 1_700_000_000_000;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn script() -> ScriptedDialogue {
    ScriptedDialogue::from_json(&read_fixture("rsa_script.json")).unwrap()
}

/// User lines of the golden transcript, in order.
pub fn golden_questions() -> Vec<String> {
    cpg_service::replay::parse_transcript(&read_fixture("rsa_golden.jsonl"))
        .unwrap()
        .into_iter()
        .filter(|l| l.role == cpg_service::replay::Speaker::User)
        .map(|l| l.text)
        .collect()
}

pub struct Harness {
    pub service: Arc<SessionService>,
    pub store: Arc<dyn EventStore>,
    pub clock: Arc<ManualClock>,
}

pub fn harness_with(store: Arc<dyn EventStore>) -> Harness {
    let clock = Arc::new(ManualClock::new(START_MS, 1000));
    let service = SessionService::new(
        cpg_core::builtin::all(),
        TaskAgent::Scripted(script()),
        FeedbackBackend::Deterministic,
        store.clone(),
    )
    .with_clock(clock.clone())
    .with_ids(IdSource::sequential("s"));
    Harness {
        service: Arc::new(service),
        store,
        clock,
    }
}

pub fn harness() -> Harness {
    harness_with(Arc::new(MemoryStore::default()))
}

impl Harness {
    /// Live state equals a fresh fold of the stored log.
    pub async fn assert_rebuild_matches(&self, session_id: &str) {
        let live = self.service.state(session_id).await.unwrap();
        let rebuilt = self.service.rebuild(session_id).unwrap();
        assert_eq!(live, rebuilt, "rebuild differs for {session_id}");
    }
}
