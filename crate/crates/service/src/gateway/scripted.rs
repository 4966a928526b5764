use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One scripted rule: when the learner's message contains `match`
/// (case-insensitive), answer with `reply`. `*` matches anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub pattern: String,
    pub reply: String,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("scripted dialogue is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scripted dialogue is empty")]
    Empty,
    #[error("last scripted entry must use the \"*\" wildcard")]
    MissingWildcard,
}

/// Offline task agent. The first matching entry wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedDialogue {
    entries: Vec<ScriptEntry>,
}

impl ScriptedDialogue {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, ScriptError> {
        match entries.last() {
            None => Err(ScriptError::Empty),
            Some(last) if last.pattern != "*" => Err(ScriptError::MissingWildcard),
            Some(_) => Ok(Self { entries }),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ScriptError> {
        Self::new(serde_json::from_str(json)?)
    }

    pub fn reply(&self, question: &str) -> &str {
        let lower = question.to_lowercase();
        self.entries
            .iter()
            .find(|e| e.pattern == "*" || lower.contains(&e.pattern.to_lowercase()))
            .map(|e| e.reply.as_str())
            .expect("validated script ends with a wildcard")
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }
}
