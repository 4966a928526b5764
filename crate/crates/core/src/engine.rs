//! Deterministic progress feedback: decides which subtasks one
//! question/answer exchange completes.
//!
//! Evaluation of a turn runs in three steps:
//!
//! 1. [`bind_exchange`] pulls RSA values (primes, exponents) out of the text
//!    into an [`RsaTaskState`].
//! 2. [`evaluate_exchange`] matches the fundamental rule and each subtask's
//!    rules against the exchange and the bound values.
//! 3. [`lock_completed`] freezes the bound values that a completed subtask
//!    relied on, so later messages cannot re-bind them.
//!
//! [`evaluate_turn`] chains the three.

use std::collections::{BTreeSet, HashSet};
use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Message, TaskDefinition};
use crate::progress::ProgressState;
use crate::rsa::{self, KeyPrimes, RsaTaskState};
use crate::rules::{keyword_matches, Check, OracleOperation, Relation, RuleSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("subtask {step} needs RSA state but none was supplied")]
    OracleUnavailable { step: u32 },
    #[error("invalid operand pattern {pattern:?}: {message}")]
    InvalidPattern { pattern: String, message: String },
}

/// What the feedback agent concluded about one exchange.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationVerdict {
    pub relevant: bool,
    /// Steps completed by this exchange that were not completed before.
    pub newly_completed: BTreeSet<u32>,
    /// Already-completed steps whose rules this exchange satisfied again.
    pub rematched: BTreeSet<u32>,
    /// Every step is completed once this verdict is applied.
    pub goal_complete: bool,
    /// The goal was reached by this exchange: either it completed the last
    /// missing step, or the goal was already complete and the exchange
    /// redid the final subtask.
    pub goal_reached: bool,
}

impl EvaluationVerdict {
    fn finish(
        relevant: bool,
        newly_completed: BTreeSet<u32>,
        rematched: BTreeSet<u32>,
        task: &TaskDefinition,
        progress: &ProgressState,
    ) -> Self {
        let goal_complete = task
            .subtasks
            .iter()
            .all(|s| progress.is_completed(s.step) || newly_completed.contains(&s.step));
        let goal_reached = goal_complete
            && (!newly_completed.is_empty() || rematched.contains(&task.final_step()));
        Self {
            relevant,
            newly_completed,
            rematched,
            goal_complete,
            goal_reached,
        }
    }
}

/// An integer literal found in text, with its byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberToken {
    pub value: u64,
    pub span: Range<usize>,
}

/// All base-10 integer literals in `text`. Digit runs glued to letters or
/// underscores ("x2", "3rd") are not numbers; literals beyond `u64` are dropped.
pub fn extract_numbers(text: &str) -> Vec<NumberToken> {
    let is_word = |c: char| c.is_alphabetic() || c == '_';
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut prev: Option<char> = None;
    while let Some((start, c)) = chars.next() {
        if !c.is_ascii_digit() {
            prev = Some(c);
            continue;
        }
        let mut end = start + 1;
        while let Some(&(i, d)) = chars.peek() {
            if !d.is_ascii_digit() {
                break;
            }
            end = i + 1;
            chars.next();
        }
        let next = chars.peek().map(|&(_, ch)| ch);
        let glued = prev.is_some_and(is_word) || next.is_some_and(is_word);
        if !glued {
            if let Ok(value) = text[start..end].parse::<u64>() {
                out.push(NumberToken {
                    value,
                    span: start..end,
                });
            }
        }
        prev = Some(text[start..end].chars().next_back().unwrap_or(c));
    }
    out
}

fn extract_values(text: &str) -> Vec<u64> {
    extract_numbers(text).into_iter().map(|t| t.value).collect()
}

fn exchange_text(question: &Message, answer: &Message) -> String {
    format!("{}\n{}", question.text, answer.text)
}

struct LabelPatterns {
    e: Vec<Regex>,
    d: Vec<Regex>,
}

fn label_patterns() -> &'static LabelPatterns {
    static PATTERNS: OnceLock<LabelPatterns> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let build = |sym: &str, name: &str| {
            [
                format!(r"(?i)\b{sym}\s*(?:=|:|\bis\b)\s*(\d+)\b"),
                format!(r"(?i)\b{name}\s+exponent\s*(?:{sym}\s*)?(?:=|:|\bis\b|\bof\b)?\s*(\d+)\b"),
                format!(r"(?i)\(\s*{sym}\s*,\s*n\s*\)\s*=\s*\(\s*(\d+)\s*,\s*\d+\s*\)"),
            ]
            .iter()
            .map(|p| Regex::new(p).expect("static pattern"))
            .collect()
        };
        LabelPatterns {
            e: build("e", "public"),
            d: build("d", "private"),
        }
    })
}

fn labelled_value(patterns: &[Regex], text: &str) -> Option<u64> {
    patterns
        .iter()
        .filter_map(|re| re.captures(text))
        .filter_map(|caps| caps.get(1)?.as_str().parse().ok())
        .next()
}

/// First pair of distinct primes, in order of appearance, whose product also appears.
fn find_prime_pair(values: &[u64]) -> Option<KeyPrimes> {
    let present: HashSet<u64> = values.iter().copied().collect();
    let primes: Vec<u64> = {
        let mut seen = HashSet::new();
        values
            .iter()
            .copied()
            .filter(|&v| rsa::is_prime(v) && seen.insert(v))
            .collect()
    };
    for (i, &p) in primes.iter().enumerate() {
        for &q in &primes[i + 1..] {
            if p.checked_mul(q).is_some_and(|n| present.contains(&n)) {
                if let Ok(keys) = KeyPrimes::new(p, q) {
                    return Some(keys);
                }
            }
        }
    }
    None
}

/// Updates the RSA bindings from one exchange's text.
///
/// A stage that already passed a check (`*_locked`) keeps its value; an
/// unverified stage is replaced when the text states a different value.
pub fn bind_exchange(state: &RsaTaskState, text: &str) -> RsaTaskState {
    let mut next = state.clone();
    let values = extract_values(text);

    if let Some(found) = find_prime_pair(&values) {
        let same = next
            .primes
            .is_some_and(|k| (k.p, k.q) == (found.p, found.q) || (k.p, k.q) == (found.q, found.p));
        if next.primes.is_none() || (!next.primes_locked && !same) {
            next.rebind_primes(found);
        }
    }

    let patterns = label_patterns();
    if let Some(e) = labelled_value(&patterns.e, text) {
        if !next.e_locked && next.e != Some(e) {
            next.e = Some(e);
            if !next.d_locked {
                next.d = None;
            }
        }
    }
    if let Some(d) = labelled_value(&patterns.d, text) {
        if !next.d_locked {
            next.d = Some(d);
        }
    }
    next
}

/// Freezes the values that the newly completed steps were verified against.
pub fn lock_completed(
    state: &RsaTaskState,
    task: &TaskDefinition,
    newly_completed: &BTreeSet<u32>,
) -> RsaTaskState {
    let mut next = state.clone();
    for subtask in task
        .subtasks
        .iter()
        .filter(|s| newly_completed.contains(&s.step))
    {
        for check in &subtask.rules.checks {
            let Check::OracleVerify {
                operation,
                plaintext,
                encoding,
            } = check
            else {
                continue;
            };
            match operation {
                OracleOperation::SemiprimeProduct | OracleOperation::TotientOfSemiprime => {
                    next.primes_locked = true;
                }
                OracleOperation::PublicExponent => {
                    next.primes_locked = true;
                    next.e_locked = true;
                }
                OracleOperation::ModInverse => {
                    next.primes_locked = true;
                    next.e_locked = true;
                    next.d_locked = true;
                }
                OracleOperation::EncryptString => {
                    next.primes_locked = true;
                    next.e_locked = true;
                    if let (Some(k), Some(e)) = (next.primes, next.e) {
                        next.ciphertext = rsa::encrypt_with(
                            *encoding,
                            plaintext.as_deref().unwrap_or_default(),
                            e,
                            k.n,
                        )
                        .ok();
                    }
                }
            }
        }
    }
    next
}

/// Inputs shared by every check of one exchange.
struct ExchangeFacts<'a> {
    lower: String,
    values: Vec<u64>,
    text: &'a str,
    rsa: Option<&'a RsaTaskState>,
}

fn is_subsequence(needle: &[u64], haystack: &[u64]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn relation_holds(relation: Relation, operands: &[u64]) -> bool {
    let present: HashSet<u64> = operands.iter().copied().collect();
    operands.iter().enumerate().any(|(i, &a)| {
        operands.iter().enumerate().any(|(j, &b)| {
            i != j
                && relation.apply(a, b).is_some_and(|c| {
                    present.contains(&c)
                        && operands
                            .iter()
                            .enumerate()
                            .any(|(k, &v)| v == c && k != i && k != j)
                })
        })
    })
}

fn oracle_check(
    operation: OracleOperation,
    plaintext: Option<&str>,
    encoding: rsa::BlockEncoding,
    state: &RsaTaskState,
    values: &[u64],
) -> bool {
    let has = |v: u64| values.contains(&v);
    let Some(k) = state.primes else {
        return false;
    };
    match operation {
        OracleOperation::SemiprimeProduct => {
            rsa::is_prime(k.p)
                && rsa::is_prime(k.q)
                && k.p != k.q
                && k.p.checked_mul(k.q) == Some(k.n)
                && has(k.p)
                && has(k.q)
                && has(k.n)
        }
        OracleOperation::TotientOfSemiprime => {
            rsa::totient_of_semiprime(k.p, k.q).is_ok_and(|phi| has(phi))
        }
        OracleOperation::PublicExponent => state
            .e
            .is_some_and(|e| has(e) && rsa::is_valid_public_exponent(e, k.phi)),
        OracleOperation::ModInverse => match (state.e, state.d) {
            (Some(e), Some(d)) => {
                has(d) && d > 1 && rsa::mod_inverse(e, k.phi).is_ok_and(|inv| inv == d)
            }
            _ => false,
        },
        OracleOperation::EncryptString => {
            let Some(e) = state.e else {
                return false;
            };
            if !rsa::is_valid_public_exponent(e, k.phi) {
                return false;
            }
            match rsa::encrypt_with(encoding, plaintext.unwrap_or_default(), e, k.n) {
                Ok(blocks) => !blocks.is_empty() && is_subsequence(&blocks, values),
                Err(_) => false,
            }
        }
    }
}

fn check_passes(check: &Check, facts: &ExchangeFacts<'_>, step: u32) -> Result<bool, EngineError> {
    match check {
        Check::KeywordPresent {
            keywords,
            min_matches,
        } => {
            let hits = keywords
                .iter()
                .filter(|k| keyword_matches(&facts.lower, k))
                .count();
            Ok(hits >= (*min_matches).max(1))
        }
        Check::NumericRelation { relation, pattern } => {
            let operands = match pattern {
                None => facts.values.clone(),
                Some(p) => {
                    let re = Regex::new(p).map_err(|err| EngineError::InvalidPattern {
                        pattern: p.clone(),
                        message: err.to_string(),
                    })?;
                    re.find_iter(facts.text)
                        .flat_map(|m| extract_values(m.as_str()))
                        .collect()
                }
            };
            Ok(relation_holds(*relation, &operands))
        }
        Check::OracleVerify {
            operation,
            plaintext,
            encoding,
        } => {
            let state = facts.rsa.ok_or(EngineError::OracleUnavailable { step })?;
            Ok(oracle_check(
                *operation,
                plaintext.as_deref(),
                *encoding,
                state,
                &facts.values,
            ))
        }
    }
}

fn rules_match(rules: &RuleSet, facts: &ExchangeFacts<'_>, step: u32) -> Result<bool, EngineError> {
    if !rules.relevance_keywords.is_empty()
        && !rules
            .relevance_keywords
            .iter()
            .any(|k| keyword_matches(&facts.lower, k))
    {
        return Ok(false);
    }
    for check in &rules.checks {
        if !check_passes(check, facts, step)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evaluates one exchange against the task's rules.
///
/// Nothing completes unless the fundamental rule matches. Every subtask is
/// evaluated independently, so one exchange may complete several steps.
/// Only the completed set of `progress` is read.
pub fn evaluate_exchange(
    question: &Message,
    answer: &Message,
    task: &TaskDefinition,
    progress: &ProgressState,
    rsa: Option<&RsaTaskState>,
) -> Result<EvaluationVerdict, EngineError> {
    let text = exchange_text(question, answer);
    let facts = ExchangeFacts {
        lower: text.to_lowercase(),
        values: extract_values(&text),
        text: &text,
        rsa,
    };
    let relevant = rules_match(&task.fundamental_rule, &facts, 0)?;
    let mut newly = BTreeSet::new();
    let mut rematched = BTreeSet::new();
    if relevant {
        for subtask in &task.subtasks {
            if rules_match(&subtask.rules, &facts, subtask.step)? {
                if progress.is_completed(subtask.step) {
                    rematched.insert(subtask.step);
                } else {
                    newly.insert(subtask.step);
                }
            }
        }
    }
    Ok(EvaluationVerdict::finish(relevant, newly, rematched, task, progress))
}

/// Whether any subtask of `task` needs RSA state.
pub fn uses_oracle(task: &TaskDefinition) -> bool {
    std::iter::once(&task.fundamental_rule)
        .chain(task.subtasks.iter().map(|s| &s.rules))
        .any(|rules| rules.oracle_operations().next().is_some())
}

/// Verdict plus the RSA bindings after the exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnEvaluation {
    pub verdict: EvaluationVerdict,
    pub rsa: Option<RsaTaskState>,
}

/// Bind, evaluate and lock in one call.
pub fn evaluate_turn(
    question: &Message,
    answer: &Message,
    task: &TaskDefinition,
    progress: &ProgressState,
    rsa: Option<&RsaTaskState>,
) -> Result<TurnEvaluation, EngineError> {
    let bound = rsa.map(|s| bind_exchange(s, &exchange_text(question, answer)));
    let verdict = evaluate_exchange(question, answer, task, progress, bound.as_ref())?;
    let rsa = bound.map(|s| lock_completed(&s, task, &verdict.newly_completed));
    Ok(TurnEvaluation { verdict, rsa })
}

/// Structured reply expected from a language-model judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawVerdict {
    pub relevant: bool,
    pub completed_steps: Vec<i64>,
}

/// Turns a judge's raw reply into a verdict that can be applied safely:
/// steps outside the task are dropped and already-completed steps never
/// count as new. An irrelevant exchange completes nothing.
pub fn sanitize_verdict(
    raw: &RawVerdict,
    task: &TaskDefinition,
    progress: &ProgressState,
) -> EvaluationVerdict {
    let mut newly = BTreeSet::new();
    let mut rematched = BTreeSet::new();
    if raw.relevant {
        for &step in &raw.completed_steps {
            let Ok(step) = u32::try_from(step) else {
                continue;
            };
            if task.subtask(step).is_none() {
                continue;
            }
            if progress.is_completed(step) {
                rematched.insert(step);
            } else {
                newly.insert(step);
            }
        }
    }
    EvaluationVerdict::finish(raw.relevant, newly, rematched, task, progress)
}
