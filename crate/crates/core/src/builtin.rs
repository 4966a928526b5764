//! Task definitions shipped with the crate.

use crate::domain::TaskDefinition;

/// The RSA exercise rule pack, schema version 1.
pub const RSA_TASK_JSON: &str = include_str!("../assets/rsa_task.v1.json");

pub const RSA_TASK_ID: &str = "rsa-encryption";

pub fn rsa_task() -> TaskDefinition {
    TaskDefinition::from_json(RSA_TASK_JSON).expect("bundled RSA task is valid")
}

/// Every bundled task.
pub fn all() -> Vec<TaskDefinition> {
    vec![rsa_task()]
}
