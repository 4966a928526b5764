//! Completion prompt shown when the goal is reached.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EvaluationVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModalPhase {
    #[default]
    None,
    Prompting,
    DismissedContinue,
    Exited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModalChoice {
    Continue,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModalError {
    #[error("no completion prompt is pending (phase {0:?})")]
    ChoiceWithoutPrompt(ModalPhase),
}

/// Next modal phase after a verdict and/or a user choice.
///
/// The first goal-complete verdict opens the prompt. After the user chooses
/// to continue, the prompt opens again only when an exchange reaches the
/// goal again (see [`EvaluationVerdict::goal_reached`]).
pub fn advance_modal(
    phase: ModalPhase,
    verdict: Option<&EvaluationVerdict>,
    choice: Option<ModalChoice>,
) -> Result<ModalPhase, ModalError> {
    if let Some(choice) = choice {
        return match (phase, choice) {
            (ModalPhase::Prompting, ModalChoice::Continue) => Ok(ModalPhase::DismissedContinue),
            (ModalPhase::Prompting, ModalChoice::Exit) => Ok(ModalPhase::Exited),
            (other, _) => Err(ModalError::ChoiceWithoutPrompt(other)),
        };
    }
    let Some(verdict) = verdict else {
        return Ok(phase);
    };
    Ok(match phase {
        ModalPhase::None if verdict.goal_complete => ModalPhase::Prompting,
        ModalPhase::DismissedContinue if verdict.goal_reached => ModalPhase::Prompting,
        other => other,
    })
}
