//! Progress bar state: which subtask markers are shown and in what order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::TaskDefinition;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgressError {
    #[error("step {0} is already completed")]
    DuplicateStep(u32),
    #[error("step {step} is not part of a task with {total} steps")]
    UnknownStep { step: u32, total: u32 },
}

/// Completed subtasks of one session run.
///
/// `display_order` always lists exactly the completed steps in ascending
/// order, whatever order they were completed in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgressState {
    total_steps: u32,
    completed_steps: BTreeSet<u32>,
    display_order: Vec<u32>,
    goal_marker_active: bool,
    goal_reached_count: u32,
}

impl ProgressState {
    /// Empty bar for a task with `total_steps` subtasks.
    pub fn new(total_steps: u32) -> Self {
        Self {
            total_steps,
            completed_steps: BTreeSet::new(),
            display_order: Vec::new(),
            goal_marker_active: false,
            goal_reached_count: 0,
        }
    }

    pub fn for_task(task: &TaskDefinition) -> Self {
        Self::new(task.step_count())
    }

    pub fn total_steps(&self) -> u32 {
        self.total_steps
    }

    pub fn completed_steps(&self) -> &BTreeSet<u32> {
        &self.completed_steps
    }

    pub fn display_order(&self) -> &[u32] {
        &self.display_order
    }

    pub fn goal_marker_active(&self) -> bool {
        self.goal_marker_active
    }

    pub fn goal_reached_count(&self) -> u32 {
        self.goal_reached_count
    }

    pub fn is_completed(&self, step: u32) -> bool {
        self.completed_steps.contains(&step)
    }

    pub fn contains_step(&self, step: u32) -> bool {
        (1..=self.total_steps).contains(&step)
    }

    /// Returns a new state with `step` marked complete.
    pub fn insert_marker(&self, step: u32) -> Result<Self, ProgressError> {
        if !self.contains_step(step) {
            return Err(ProgressError::UnknownStep {
                step,
                total: self.total_steps,
            });
        }
        if self.completed_steps.contains(&step) {
            return Err(ProgressError::DuplicateStep(step));
        }
        let mut next = self.clone();
        next.completed_steps.insert(step);
        let at = next.display_order.partition_point(|&s| s < step);
        next.display_order.insert(at, step);
        next.goal_marker_active = next.completed_steps.len() as u32 == next.total_steps;
        Ok(next)
    }

    /// Records that the completion prompt was shown (first time or again).
    pub fn record_goal_reached(&self) -> Self {
        let mut next = self.clone();
        next.goal_reached_count += 1;
        next
    }

    /// Payload for rendering the bar. Labels of uncompleted subtasks never appear.
    pub fn view(&self, task: &TaskDefinition) -> ProgressView {
        ProgressView {
            markers: self
                .display_order
                .iter()
                .map(|&step| MarkerView {
                    step,
                    label: task.label(step).unwrap_or_default().to_string(),
                    active: true,
                })
                .collect(),
            goal: GoalMarkerView {
                label: task.goal.clone(),
                active: self.goal_marker_active,
            },
            goal_reached_count: self.goal_reached_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkerView {
    pub step: u32,
    pub label: String,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalMarkerView {
    pub label: String,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgressView {
    pub markers: Vec<MarkerView>,
    pub goal: GoalMarkerView,
    pub goal_reached_count: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use proptest::prelude::*;

    #[test]
    fn later_step_is_inserted_between() {
        let p = ProgressState::new(6);
        let p = p.insert_marker(1).unwrap().insert_marker(3).unwrap();
        assert_eq!(p.display_order(), &[1, 3]);
        let p = p.insert_marker(2).unwrap();
        assert_eq!(p.display_order(), &[1, 2, 3]);
        assert!(!p.goal_marker_active());
    }

    #[test]
    fn first_marker() {
        let p = ProgressState::new(6).insert_marker(4).unwrap();
        assert_eq!(p.display_order(), &[4]);
    }

    #[test]
    fn duplicate_and_unknown_steps() {
        let p = ProgressState::new(3).insert_marker(2).unwrap();
        assert_eq!(p.insert_marker(2), Err(ProgressError::DuplicateStep(2)));
        assert_eq!(
            p.insert_marker(0),
            Err(ProgressError::UnknownStep { step: 0, total: 3 })
        );
        assert_eq!(
            p.insert_marker(4),
            Err(ProgressError::UnknownStep { step: 4, total: 3 })
        );
    }

    #[test]
    fn goal_marker_turns_on_with_last_step() {
        let mut p = ProgressState::new(3);
        for step in [3, 1] {
            p = p.insert_marker(step).unwrap();
            assert!(!p.goal_marker_active());
        }
        p = p.insert_marker(2).unwrap();
        assert!(p.goal_marker_active());
        assert_eq!(p.goal_reached_count(), 0);
        assert_eq!(p.record_goal_reached().goal_reached_count(), 1);
    }

    #[test]
    fn view_hides_uncompleted_labels() {
        let task = builtin::rsa_task();
        let p = ProgressState::for_task(&task).insert_marker(2).unwrap();
        let view = p.view(&task);
        assert_eq!(view.markers.len(), 1);
        assert_eq!(view.markers[0].label, "Multiplication of Primes");
        assert!(!view.goal.active);
        let json = serde_json::to_string(&view).unwrap();
        for subtask in task.subtasks.iter().filter(|s| s.step != 2) {
            assert!(!json.contains(&subtask.label), "leaked {}", subtask.label);
        }
    }

    proptest! {
        #[test]
        fn display_order_is_sorted_completed_set(
            order in Just((1..=7u32).collect::<Vec<_>>()).prop_shuffle(),
            take in 0usize..=7,
        ) {
            let mut p = ProgressState::new(7);
            for &step in &order[..take] {
                p = p.insert_marker(step).unwrap();
                let sorted: Vec<u32> = p.completed_steps().iter().copied().collect();
                prop_assert_eq!(p.display_order(), sorted.as_slice());
            }
            prop_assert_eq!(p.goal_marker_active(), take == 7);
        }
    }
}
