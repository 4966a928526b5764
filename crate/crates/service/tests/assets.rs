//! Versioned assets are frozen: editing one means adding a new version.

use sha2::{Digest, Sha256};

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn judge_prompt_v1_is_frozen() {
    assert_eq!(
        hex(cpg_service::gateway::JUDGE_PROMPT_V1.as_bytes()),
        "4d6f1a92e2bf5718cb20e4c761a9aece87de0eca0e6f596b61df88962410461a"
    );
}

#[test]
fn rsa_task_v1_is_frozen() {
    assert_eq!(
        hex(cpg_core::builtin::RSA_TASK_JSON.as_bytes()),
        "71d481e8f17887c5b9e1cc398353e2b2f9ce3cf3849605054c0f999c17fc5227"
    );
}

#[test]
fn demo_config_loads() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/config.toml");
    let config = cpg_service::config::ServiceConfig::load(&path).unwrap();
    assert!(config.task_agent.script.as_ref().unwrap().exists());
    cpg_service::gateway::TaskAgent::from_config(&config.task_agent).unwrap();
    assert_eq!(config.tasks().unwrap().len(), 1);
}
