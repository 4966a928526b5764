use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use thiserror::Error;

use super::events::SessionEvent;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("event log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("{session} line {line}: {message}")]
    Corrupt {
        session: String,
        line: usize,
        message: String,
    },
    #[error("invalid session id {0:?}")]
    InvalidId(String),
}

/// Append-only event storage keyed by session.
pub trait EventStore: Send + Sync {
    /// Appends a batch belonging to one session in a single write.
    fn append(&self, events: &[SessionEvent]) -> Result<(), StoreError>;
    fn load(&self, session_id: &str) -> Result<Vec<SessionEvent>, StoreError>;
    fn session_ids(&self) -> Result<Vec<String>, StoreError>;
}

#[derive(Default)]
pub struct MemoryStore {
    logs: Mutex<BTreeMap<String, Vec<SessionEvent>>>,
}

impl EventStore for MemoryStore {
    fn append(&self, events: &[SessionEvent]) -> Result<(), StoreError> {
        let mut logs = self.logs.lock().unwrap();
        for e in events {
            logs.entry(e.session_id.clone()).or_default().push(e.clone());
        }
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        Ok(self
            .logs
            .lock()
            .unwrap()
            .get(session_id)
            .cloned()
            .unwrap_or_default())
    }

    fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.logs.lock().unwrap().keys().cloned().collect())
    }
}

/// One `<session>.jsonl` file per session.
pub struct JsonlStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl JsonlStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    fn path(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        let safe = !session_id.is_empty()
            && session_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !safe {
            return Err(StoreError::InvalidId(session_id.to_string()));
        }
        Ok(self.dir.join(format!("{session_id}.jsonl")))
    }
}

impl EventStore for JsonlStore {
    fn append(&self, events: &[SessionEvent]) -> Result<(), StoreError> {
        let Some(first) = events.first() else {
            return Ok(());
        };
        let mut buf = String::new();
        for e in events {
            debug_assert_eq!(e.session_id, first.session_id);
            buf.push_str(&serde_json::to_string(e).expect("events serialize"));
            buf.push('\n');
        }
        let path = self.path(&first.session_id)?;
        let _guard = self.write_lock.lock().unwrap();
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        file.write_all(buf.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    fn load(&self, session_id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        let path = self.path(session_id)?;
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    session: session_id.to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = vec![];
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
