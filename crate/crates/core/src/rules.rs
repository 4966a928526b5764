//! Declarative evaluation rules attached to a task and each of its subtasks.

use serde::{Deserialize, Serialize};

use crate::rsa::BlockEncoding;

/// Keywords gate the rule set (any one must appear); every check must then pass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleSet {
    #[serde(default)]
    pub relevance_keywords: Vec<String>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Check {
    /// At least `min_matches` of `keywords` occur in the exchange.
    #[serde(rename_all = "camelCase")]
    KeywordPresent {
        keywords: Vec<String>,
        #[serde(default = "one")]
        min_matches: usize,
    },
    /// Some operands `a`, `b`, `c` at distinct positions satisfy `a <op> b = c`.
    ///
    /// Operands are the integers inside matches of `pattern`, or every integer
    /// in the exchange when no pattern is given.
    #[serde(rename_all = "camelCase")]
    NumericRelation {
        relation: Relation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<String>,
    },
    /// Values bound from the conversation are verified with the RSA oracle.
    #[serde(rename_all = "camelCase")]
    OracleVerify {
        operation: OracleOperation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plaintext: Option<String>,
        #[serde(default, skip_serializing_if = "is_default_encoding")]
        encoding: BlockEncoding,
    },
}

fn one() -> usize {
    1
}

fn is_default_encoding(e: &BlockEncoding) -> bool {
    *e == BlockEncoding::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Product,
    Sum,
}

impl Relation {
    pub fn apply(self, a: u64, b: u64) -> Option<u64> {
        match self {
            Relation::Product => a.checked_mul(b),
            Relation::Sum => a.checked_add(b),
        }
    }
}

/// Oracle routine an `oracle-verify` check delegates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleOperation {
    /// `n = p·q` with `p`, `q` distinct primes.
    SemiprimeProduct,
    /// `φ = (p−1)(q−1)`.
    TotientOfSemiprime,
    /// `1 < e < φ`, `gcd(e, φ) = 1`.
    PublicExponent,
    /// `e·d ≡ 1 (mod φ)`.
    ModInverse,
    /// Every ciphertext block equals `code^e mod n`.
    EncryptString,
}

impl RuleSet {
    pub fn oracle_operations(&self) -> impl Iterator<Item = OracleOperation> + '_ {
        self.checks.iter().filter_map(|c| match c {
            Check::OracleVerify { operation, .. } => Some(*operation),
            _ => None,
        })
    }
}

/// Case-insensitive whole-word keyword search. A trailing `*` makes the
/// keyword a prefix match (`encrypt*` matches "encryption").
pub fn keyword_matches(haystack_lower: &str, keyword: &str) -> bool {
    let keyword = keyword.to_lowercase();
    let (needle, prefix) = match keyword.strip_suffix('*') {
        Some(stem) => (stem, true),
        None => (keyword.as_str(), false),
    };
    if needle.is_empty() {
        return false;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    haystack_lower.match_indices(needle).any(|(at, _)| {
        let before_ok = haystack_lower[..at]
            .chars()
            .next_back()
            .is_none_or(|c| !is_word(c));
        let after_ok = prefix
            || haystack_lower[at + needle.len()..]
                .chars()
                .next()
                .is_none_or(|c| !is_word(c));
        before_ok && after_ok
    })
}
