//! Conversation and task-definition types shared by every other module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{Check, RuleSet};

/// Number of most recent messages handed to the task agent (five question/answer pairs).
pub const CONTEXT_WINDOW: usize = 10;

/// Supported range for the number of subtasks in a task definition.
pub const MIN_SUBTASKS: usize = 3;
pub const MAX_SUBTASKS: usize = 7;

/// Only schema version understood by [`TaskDefinition::from_json`].
pub const TASK_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    User,
    TaskAgent,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub turn_index: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: i64,
}

impl Message {
    pub fn new(role: Role, text: impl Into<String>, turn_index: u64, timestamp: i64) -> Self {
        Self {
            role,
            text: text.into(),
            turn_index,
            timestamp,
        }
    }

    pub fn user(text: impl Into<String>, turn_index: u64, timestamp: i64) -> Self {
        Self::new(Role::User, text, turn_index, timestamp)
    }

    pub fn agent(text: impl Into<String>, turn_index: u64, timestamp: i64) -> Self {
        Self::new(Role::TaskAgent, text, turn_index, timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Subtask {
    pub step: u32,
    pub label: String,
    pub rules: RuleSet,
    #[serde(default)]
    pub active: bool,
}

/// A goal split into ordered subtasks, each carrying its own evaluation rules.
///
/// The final-goal marker is derived from `goal`; it is never one of the subtasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskDefinition {
    pub schema_version: String,
    pub id: String,
    pub goal: String,
    pub description: String,
    pub subtasks: Vec<Subtask>,
    pub fundamental_rule: RuleSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("subtasks: {count} subtasks is below the minimum of {MIN_SUBTASKS}")]
    TooFewSubtasks { count: usize },
    #[error("subtasks: {count} subtasks exceeds the maximum of {MAX_SUBTASKS}")]
    TooManySubtasks { count: usize },
    #[error("subtasks[{index}].step: expected {expected}, found {found}")]
    NonContiguousSteps {
        index: usize,
        expected: u32,
        found: u32,
    },
    #[error("subtasks[{index}].rules: subtask {step} has no checks")]
    EmptyRuleSet { index: usize, step: u32 },
    #[error("schemaVersion: unsupported version {found:?}")]
    UnsupportedSchema { found: String },
    #[error("{field}: invalid operand pattern {pattern:?}")]
    InvalidPattern { field: String, pattern: String },
}

impl ValidationError {
    /// Path of the offending field within the task document.
    pub fn field(&self) -> String {
        match self {
            Self::TooFewSubtasks { .. } | Self::TooManySubtasks { .. } => "subtasks".into(),
            Self::NonContiguousSteps { index, .. } => format!("subtasks[{index}].step"),
            Self::EmptyRuleSet { index, .. } => format!("subtasks[{index}].rules"),
            Self::UnsupportedSchema { .. } => "schemaVersion".into(),
            Self::InvalidPattern { field, .. } => field.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TaskLoadError {
    #[error("task definition is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid task definition: {0}")]
    Invalid(#[from] ValidationError),
}

/// Checks subtask count, step numbering and rule presence.
pub fn validate_task_definition(def: &TaskDefinition) -> Result<(), ValidationError> {
    if def.schema_version != TASK_SCHEMA_VERSION {
        return Err(ValidationError::UnsupportedSchema {
            found: def.schema_version.clone(),
        });
    }
    let count = def.subtasks.len();
    if count < MIN_SUBTASKS {
        return Err(ValidationError::TooFewSubtasks { count });
    }
    if count > MAX_SUBTASKS {
        return Err(ValidationError::TooManySubtasks { count });
    }
    for (index, subtask) in def.subtasks.iter().enumerate() {
        let expected = index as u32 + 1;
        if subtask.step != expected {
            return Err(ValidationError::NonContiguousSteps {
                index,
                expected,
                found: subtask.step,
            });
        }
        if subtask.rules.checks.is_empty() {
            return Err(ValidationError::EmptyRuleSet {
                index,
                step: subtask.step,
            });
        }
        check_patterns(&subtask.rules, &format!("subtasks[{index}].rules"))?;
    }
    check_patterns(&def.fundamental_rule, "fundamentalRule")?;
    Ok(())
}

fn check_patterns(rules: &RuleSet, field: &str) -> Result<(), ValidationError> {
    for check in &rules.checks {
        if let Check::NumericRelation {
            pattern: Some(pattern),
            ..
        } = check
        {
            if regex::Regex::new(pattern).is_err() {
                return Err(ValidationError::InvalidPattern {
                    field: field.to_string(),
                    pattern: pattern.clone(),
                });
            }
        }
    }
    Ok(())
}

impl TaskDefinition {
    /// Parses and validates a task document.
    pub fn from_json(json: &str) -> Result<Self, TaskLoadError> {
        let def: TaskDefinition = serde_json::from_str(json)?;
        validate_task_definition(&def)?;
        Ok(def)
    }

    pub fn step_count(&self) -> u32 {
        self.subtasks.len() as u32
    }

    pub fn subtask(&self, step: u32) -> Option<&Subtask> {
        self.subtasks.iter().find(|s| s.step == step)
    }

    pub fn label(&self, step: u32) -> Option<&str> {
        self.subtask(step).map(|s| s.label.as_str())
    }

    /// The last subtask, whose completion produces the goal's output.
    pub fn final_step(&self) -> u32 {
        self.subtasks.iter().map(|s| s.step).max().unwrap_or(0)
    }
}

/// Most recent [`CONTEXT_WINDOW`] messages, oldest first.
pub fn context_window(history: &[Message]) -> &[Message] {
    let start = history.len().saturating_sub(CONTEXT_WINDOW);
    &history[start..]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn with_steps(n: usize) -> TaskDefinition {
        let mut def = builtin::rsa_task();
        let template = def.subtasks[1].clone();
        def.subtasks = (1..=n as u32)
            .map(|step| Subtask {
                step,
                label: format!("Step {step}"),
                ..template.clone()
            })
            .collect();
        def
    }

    #[test]
    fn rsa_pack_is_valid() {
        let def = builtin::rsa_task();
        assert_eq!(validate_task_definition(&def), Ok(()));
        assert_eq!(def.step_count(), 6);
    }

    #[test]
    fn subtask_count_bounds() {
        assert_eq!(
            validate_task_definition(&with_steps(2)),
            Err(ValidationError::TooFewSubtasks { count: 2 })
        );
        assert_eq!(
            validate_task_definition(&with_steps(8)),
            Err(ValidationError::TooManySubtasks { count: 8 })
        );
        for n in 3..=7 {
            assert_eq!(validate_task_definition(&with_steps(n)), Ok(()));
        }
    }

    #[test]
    fn gaps_and_duplicates_are_rejected() {
        let mut def = with_steps(4);
        def.subtasks[2].step = 4;
        let err = validate_task_definition(&def).unwrap_err();
        assert_eq!(
            err,
            ValidationError::NonContiguousSteps {
                index: 2,
                expected: 3,
                found: 4
            }
        );
        assert_eq!(err.field(), "subtasks[2].step");

        let mut def = with_steps(4);
        def.subtasks[1].step = 1;
        assert!(matches!(
            validate_task_definition(&def),
            Err(ValidationError::NonContiguousSteps { index: 1, .. })
        ));
    }

    #[test]
    fn empty_rule_set_names_the_subtask() {
        let mut def = with_steps(3);
        def.subtasks[2].rules.checks.clear();
        let err = validate_task_definition(&def).unwrap_err();
        assert_eq!(err, ValidationError::EmptyRuleSet { index: 2, step: 3 });
        assert_eq!(err.field(), "subtasks[2].rules");
    }

    #[test]
    fn bad_operand_pattern() {
        let mut def = with_steps(3);
        def.subtasks[0].rules.checks.push(Check::NumericRelation {
            relation: crate::rules::Relation::Product,
            pattern: Some("(unclosed".into()),
        });
        let err = validate_task_definition(&def).unwrap_err();
        assert_eq!(err.field(), "subtasks[0].rules");
    }

    #[test]
    fn unknown_schema_version() {
        let mut def = with_steps(3);
        def.schema_version = "2".into();
        assert!(matches!(
            validate_task_definition(&def),
            Err(ValidationError::UnsupportedSchema { .. })
        ));
    }

    fn history(n: usize) -> Vec<Message> {
        (0..n)
            .map(|i| {
                let role = if i % 2 == 0 { Role::User } else { Role::TaskAgent };
                Message::new(role, format!("m{i}"), i as u64, i as i64)
            })
            .collect()
    }

    #[test]
    fn context_window_keeps_latest_ten() {
        let h = history(12);
        let w = context_window(&h);
        assert_eq!(w.len(), 10);
        assert_eq!(w, &h[2..]);
        assert!(context_window(&[]).is_empty());
        let h = history(10);
        assert_eq!(context_window(&h), &h[..]);
    }

    #[test]
    fn message_roles_use_kebab_case() {
        let m = Message::agent("hi", 1, 5);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"{"role":"task-agent","text":"hi","turnIndex":1,"timestamp":5}"#
        );
    }
}
