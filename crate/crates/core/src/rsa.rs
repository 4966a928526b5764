//! Exact integer arithmetic for the RSA exercise.
//!
//! Everything works on `u64` values with `u128` intermediates, which covers
//! any modulus below 2^64. Nothing here is meant to be cryptographically
//! secure; it is the ground truth used to check what users and the task
//! agent compute by hand.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsaError {
    #[error("modulus must be non-zero")]
    ZeroModulus,
    #[error("{a} has no inverse modulo {m}")]
    NotCoprime { a: u64, m: u64 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("p and q must be distinct (both {0})")]
    EqualPrimes(u64),
    #[error("block value {code} is not below the modulus {n}")]
    BlockTooLarge { code: u64, n: u64 },
    #[error("decrypted block {0} is not a valid character")]
    InvalidBlock(u64),
    #[error("packed encoding cannot represent NUL characters")]
    NulInPackedText,
    #[error("p·q overflows 64 bits")]
    ModulusOverflow,
}

/// Deterministic Miller-Rabin; these witnesses are exact for every `u64`.
pub fn is_prime(x: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if x < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if x % p == 0 {
            return x == p;
        }
    }
    let mut d = x - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut y = pow_mod_unchecked(a, d, x);
        if y == 1 || y == x - 1 {
            continue;
        }
        for _ in 1..s {
            y = mul_mod(y, y, x);
            if y == x - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_unchecked(base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut result = 1 % modulus;
    let mut base = base % modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, base, modulus);
        }
        base = mul_mod(base, base, modulus);
        exp >>= 1;
    }
    result
}

/// `base^exp mod modulus` by square-and-multiply.
pub fn mod_pow(base: u64, exp: u64, modulus: u64) -> Result<u64, RsaError> {
    if modulus == 0 {
        return Err(RsaError::ZeroModulus);
    }
    Ok(pow_mod_unchecked(base, exp, modulus))
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Inverse of `a` modulo `m` via the extended Euclidean algorithm.
pub fn mod_inverse(a: u64, m: u64) -> Result<u64, RsaError> {
    if m == 0 {
        return Err(RsaError::ZeroModulus);
    }
    if m == 1 {
        return Err(RsaError::NotCoprime { a, m });
    }
    let (mut old_r, mut r) = (i128::from(a % m), i128::from(m));
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(RsaError::NotCoprime { a, m });
    }
    Ok(old_s.rem_euclid(i128::from(m)) as u64)
}

/// φ(p·q) = (p−1)(q−1) for distinct primes.
pub fn totient_of_semiprime(p: u64, q: u64) -> Result<u64, RsaError> {
    for x in [p, q] {
        if !is_prime(x) {
            return Err(RsaError::NotPrime(x));
        }
    }
    if p == q {
        return Err(RsaError::EqualPrimes(p));
    }
    Ok((p - 1) * (q - 1))
}

/// How plaintext is turned into integer blocks before exponentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum BlockEncoding {
    /// One block per character holding its code point (the ASCII code for ASCII text).
    #[default]
    PerChar,
    /// UTF-8 bytes packed big-endian, `width` bytes per block.
    Packed { width: usize },
}

impl BlockEncoding {
    pub fn encode(&self, plaintext: &str) -> Result<Vec<u64>, RsaError> {
        match *self {
            BlockEncoding::PerChar => Ok(plaintext.chars().map(|c| c as u64).collect()),
            BlockEncoding::Packed { width } => {
                if plaintext.contains('\0') {
                    return Err(RsaError::NulInPackedText);
                }
                let width = width.clamp(1, 7);
                Ok(plaintext
                    .as_bytes()
                    .chunks(width)
                    .map(|chunk| chunk.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
                    .collect())
            }
        }
    }

    pub fn decode(&self, blocks: &[u64]) -> Result<String, RsaError> {
        match *self {
            BlockEncoding::PerChar => blocks
                .iter()
                .map(|&b| {
                    u32::try_from(b)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or(RsaError::InvalidBlock(b))
                })
                .collect(),
            BlockEncoding::Packed { .. } => {
                let mut bytes = Vec::new();
                for &block in blocks {
                    let be = block.to_be_bytes();
                    let first = be.iter().position(|&b| b != 0).unwrap_or(be.len());
                    bytes.extend_from_slice(&be[first..]);
                }
                String::from_utf8(bytes).map_err(|_| RsaError::InvalidBlock(0))
            }
        }
    }
}

pub fn encrypt_string(plaintext: &str, e: u64, n: u64) -> Result<Vec<u64>, RsaError> {
    encrypt_with(BlockEncoding::PerChar, plaintext, e, n)
}

pub fn encrypt_with(
    encoding: BlockEncoding,
    plaintext: &str,
    e: u64,
    n: u64,
) -> Result<Vec<u64>, RsaError> {
    if n == 0 {
        return Err(RsaError::ZeroModulus);
    }
    encoding
        .encode(plaintext)?
        .into_iter()
        .map(|code| {
            if code >= n {
                Err(RsaError::BlockTooLarge { code, n })
            } else {
                mod_pow(code, e, n)
            }
        })
        .collect()
}

/// Inverse of [`encrypt_string`]; the exercise never asks for it, tests do.
pub fn decrypt_string(blocks: &[u64], d: u64, n: u64) -> Result<String, RsaError> {
    decrypt_with(BlockEncoding::PerChar, blocks, d, n)
}

pub fn decrypt_with(
    encoding: BlockEncoding,
    blocks: &[u64],
    d: u64,
    n: u64,
) -> Result<String, RsaError> {
    let plain = blocks
        .iter()
        .map(|&c| mod_pow(c, d, n))
        .collect::<Result<Vec<_>, _>>()?;
    encoding.decode(&plain)
}

/// Values a user has established so far in the RSA exercise.
///
/// Each stage is filled in as the conversation produces it. A stage marked
/// `locked` has passed a check and is no longer re-bound by later messages.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RsaTaskState {
    pub primes: Option<KeyPrimes>,
    pub primes_locked: bool,
    pub e: Option<u64>,
    pub e_locked: bool,
    pub d: Option<u64>,
    pub d_locked: bool,
    pub ciphertext: Option<Vec<u64>>,
}

/// The prime pair with its product and totient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyPrimes {
    pub p: u64,
    pub q: u64,
    pub n: u64,
    pub phi: u64,
}

impl KeyPrimes {
    pub fn new(p: u64, q: u64) -> Result<Self, RsaError> {
        let phi = totient_of_semiprime(p, q)?;
        let n = p.checked_mul(q).ok_or(RsaError::ModulusOverflow)?;
        Ok(Self { p, q, n, phi })
    }
}

impl RsaTaskState {
    pub fn n(&self) -> Option<u64> {
        self.primes.map(|k| k.n)
    }

    pub fn phi(&self) -> Option<u64> {
        self.primes.map(|k| k.phi)
    }

    /// Binds a new prime pair. Unverified exponents are kept (they are
    /// re-checked against the new totient); the old ciphertext is dropped.
    pub fn rebind_primes(&mut self, primes: KeyPrimes) {
        self.primes = Some(primes);
        self.primes_locked = false;
        self.ciphertext = None;
    }
}

/// `1 < e < φ` and `gcd(e, φ) = 1`.
pub fn is_valid_public_exponent(e: u64, phi: u64) -> bool {
    e > 1 && e < phi && gcd(e, phi) == 1
}

/// `1 < d < φ` and `e·d ≡ 1 (mod φ)`.
pub fn is_valid_private_exponent(e: u64, d: u64, phi: u64) -> bool {
    d > 1 && d < phi && phi > 1 && mul_mod(e, d, phi) == 1
}
