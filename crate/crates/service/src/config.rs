//! TOML configuration for `cpg serve`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::gateway::{BackendConfig, ScriptError};
use cpg_core::domain::TaskLoadError;
use cpg_core::TaskDefinition;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("missing setting {0}")]
    Missing(&'static str),
    #[error("[{0}] is missing {1}")]
    MissingIn(&'static str, &'static str),
    #[error("[{section}] does not support kind = \"{kind}\"")]
    Unsupported {
        section: &'static str,
        kind: &'static str,
    },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("{path}: {source}")]
    Task {
        path: PathBuf,
        #[source]
        source: TaskLoadError,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    /// Directory holding one event log per session.
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Idle time after which an active session is closed as abandoned.
    #[serde(default = "default_session_timeout")]
    pub session_timeout_secs: u64,
    /// Extra task definitions loaded next to the bundled ones.
    #[serde(default)]
    pub task_files: Vec<PathBuf>,
    #[serde(default)]
    pub system_prompt: Option<String>,
    pub task_agent: BackendConfig,
    #[serde(default = "BackendConfig::deterministic")]
    pub feedback: BackendConfig,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn default_session_timeout() -> u64 {
    3600
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.data_dir);
        config.task_files.iter_mut().for_each(resolve);
        if let Some(script) = config.task_agent.script.as_mut() {
            resolve(script);
        }
        Ok(config)
    }

    /// Bundled tasks followed by the configured task files.
    pub fn tasks(&self) -> Result<Vec<TaskDefinition>, ConfigError> {
        let mut tasks = cpg_core::builtin::all();
        for path in &self.task_files {
            let text =
                std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.clone(), e))?;
            let task = TaskDefinition::from_json(&text).map_err(|source| ConfigError::Task {
                path: path.clone(),
                source,
            })?;
            tasks.push(task);
        }
        Ok(tasks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::BackendKind;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ServiceConfig::from_toml(
            "[task_agent]\nkind = \"scripted\"\nscript = \"script.json\"\n",
        )
        .unwrap();
        assert_eq!(c.session_timeout_secs, 3600);
        assert_eq!(c.feedback.kind, BackendKind::Deterministic);
        assert_eq!(c.task_agent.max_retries, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ServiceConfig::from_toml(
            "api_key = \"sk-oops\"\n[task_agent]\nkind = \"scripted\"\n"
        )
        .is_err());
    }
}
