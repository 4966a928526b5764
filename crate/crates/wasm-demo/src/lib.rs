//! Browser bindings for three interactive operations:
//!
//! * [`Guide`]: feed question/answer pairs to the RSA task and watch the progress bar.
//! * [`rsa_keys`]: derive a key pair from `p`, `q`, `e` and encrypt a message.
//! * [`t_test`]: paired or Welch t-test with Cohen's d on two number lists.
//!
//! Every export returns a JSON string. The logic lives in plain functions so
//! it is tested natively.

use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

use cpg_core::analytics::stats::{
    cohens_d_independent, cohens_d_paired, independent_t_test, paired_t_test, StatsError,
};
use cpg_core::engine::{evaluate_turn, EngineError};
use cpg_core::rsa::{self, KeyPrimes, RsaError};
use cpg_core::{
    advance_modal, builtin, Message, ModalChoice, ModalPhase, ProgressState, ProgressView,
    RsaTaskState, TaskDefinition,
};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Input(String),
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo types serialize")
}

fn js_err(e: DemoError) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GuideSnapshot {
    pub progress: ProgressView,
    pub newly_completed: Vec<u32>,
    pub relevant: bool,
    pub modal: ModalPhase,
    pub turns: u64,
}

/// The RSA task with the rule engine as judge, held in the page.
#[wasm_bindgen]
pub struct Guide {
    task: TaskDefinition,
    progress: ProgressState,
    rsa: RsaTaskState,
    modal: ModalPhase,
    turns: u64,
}

impl Default for Guide {
    fn default() -> Self {
        let task = builtin::rsa_task();
        Self {
            progress: ProgressState::for_task(&task),
            task,
            rsa: RsaTaskState::default(),
            modal: ModalPhase::None,
            turns: 0,
        }
    }
}

impl Guide {
    pub fn exchange(&mut self, question: &str, answer: &str) -> Result<GuideSnapshot, DemoError> {
        if self.modal == ModalPhase::Prompting {
            return Err(DemoError::Input("choose continue or exit first".into()));
        }
        let q = Message::user(question, self.turns, 0);
        let a = Message::agent(answer, self.turns + 1, 0);
        let eval = evaluate_turn(&q, &a, &self.task, &self.progress, Some(&self.rsa))?;
        for &step in &eval.verdict.newly_completed {
            self.progress = self
                .progress
                .insert_marker(step)
                .map_err(|e| DemoError::Input(e.to_string()))?;
        }
        if let Some(rsa) = eval.rsa {
            self.rsa = rsa;
        }
        let next = advance_modal(self.modal, Some(&eval.verdict), None)
            .map_err(|e| DemoError::Input(e.to_string()))?;
        if next == ModalPhase::Prompting {
            self.progress = self.progress.record_goal_reached();
        }
        self.modal = next;
        self.turns += 2;
        Ok(self.snapshot(
            eval.verdict.newly_completed.into_iter().collect(),
            eval.verdict.relevant,
        ))
    }

    pub fn choose(&mut self, choice: ModalChoice) -> Result<GuideSnapshot, DemoError> {
        self.modal = advance_modal(self.modal, None, Some(choice))
            .map_err(|e| DemoError::Input(e.to_string()))?;
        Ok(self.snapshot(vec![], true))
    }

    pub fn snapshot(&self, newly_completed: Vec<u32>, relevant: bool) -> GuideSnapshot {
        GuideSnapshot {
            progress: self.progress.view(&self.task),
            newly_completed,
            relevant,
            modal: self.modal,
            turns: self.turns,
        }
    }
}

#[wasm_bindgen]
impl Guide {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Guide {
        Guide::default()
    }

    /// Judges one exchange and returns the new snapshot as JSON.
    pub fn submit(&mut self, question: &str, answer: &str) -> Result<String, JsError> {
        self.exchange(question, answer).map(|s| to_json(&s)).map_err(js_err)
    }

    /// `"continue"` or `"exit"`.
    #[wasm_bindgen(js_name = respond)]
    pub fn respond(&mut self, choice: &str) -> Result<String, JsError> {
        let choice = match choice {
            "continue" => ModalChoice::Continue,
            "exit" => ModalChoice::Exit,
            other => return Err(js_err(DemoError::Input(format!("unknown choice {other:?}")))),
        };
        self.choose(choice).map(|s| to_json(&s)).map_err(js_err)
    }

    pub fn state(&self) -> String {
        to_json(&self.snapshot(vec![], true))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyReport {
    pub n: u64,
    pub phi: u64,
    pub e: u64,
    pub d: u64,
    pub ciphertext: Vec<u64>,
    pub decrypted: String,
}

pub fn key_report(p: u64, q: u64, e: u64, message: &str) -> Result<KeyReport, DemoError> {
    let keys = KeyPrimes::new(p, q)?;
    if !rsa::is_valid_public_exponent(e, keys.phi) {
        return Err(DemoError::Input(format!(
            "e = {e} must satisfy 1 < e < {} and gcd(e, {}) = 1",
            keys.phi, keys.phi
        )));
    }
    let d = rsa::mod_inverse(e, keys.phi)?;
    let ciphertext = rsa::encrypt_string(message, e, keys.n)?;
    let decrypted = rsa::decrypt_string(&ciphertext, d, keys.n)?;
    Ok(KeyReport {
        n: keys.n,
        phi: keys.phi,
        e,
        d,
        ciphertext,
        decrypted,
    })
}

/// Key pair and ciphertext for `message`, as JSON.
#[wasm_bindgen]
pub fn rsa_keys(p: u64, q: u64, e: u64, message: &str) -> Result<String, JsError> {
    key_report(p, q, e, message).map(|r| to_json(&r)).map_err(js_err)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TTestReport {
    pub test: &'static str,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub cohens_d: f64,
}

fn numbers(text: &str) -> Result<Vec<f64>, DemoError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| DemoError::Input(format!("{s:?} is not a number")))
        })
        .collect()
}

/// `a` and `b` are comma- or space-separated numbers. Paired compares
/// `b − a` (post minus pre); otherwise a Welch test of `a` against `b`.
pub fn t_test_report(a: &str, b: &str, paired: bool) -> Result<TTestReport, DemoError> {
    let (a, b) = (numbers(a)?, numbers(b)?);
    Ok(if paired {
        let r = paired_t_test(&a, &b)?;
        TTestReport {
            test: "paired",
            t: r.t,
            df: r.df,
            p: r.p,
            cohens_d: cohens_d_paired(&a, &b)?,
        }
    } else {
        let r = independent_t_test(&a, &b)?;
        TTestReport {
            test: "welch",
            t: r.t,
            df: r.df,
            p: r.p,
            cohens_d: cohens_d_independent(&a, &b)?,
        }
    })
}

#[wasm_bindgen]
pub fn t_test(a: &str, b: &str, paired: bool) -> Result<String, JsError> {
    t_test_report(a, b, paired).map(|r| to_json(&r)).map_err(js_err)
}
