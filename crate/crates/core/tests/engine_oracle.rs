use std::collections::BTreeSet;

use cpg_core::builtin;
use cpg_core::engine::{evaluate_turn, TurnEvaluation};
use cpg_core::rsa::{KeyPrimes, RsaTaskState};
use cpg_core::{Message, ProgressState, TaskDefinition};
use proptest::prelude::*;

fn sieve(limit: usize) -> Vec<u64> {
    let mut is = vec![true; limit + 1];
    is[0] = false;
    is[1] = false;
    for i in 2..=limit {
        if is[i] {
            let mut j = i * i;
            while j <= limit {
                is[j] = false;
                j += i;
            }
        }
    }
    (0..=limit).filter(|&i| is[i]).map(|i| i as u64).collect()
}

fn euclid(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        euclid(b, a % b)
    }
}

fn naive_pow(base: u64, exp: u64, m: u64) -> u64 {
    (0..exp).fold(1 % m, |acc, _| ((acc as u128 * base as u128) % m as u128) as u64)
}

fn turn(
    task: &TaskDefinition,
    progress: &ProgressState,
    rsa: &RsaTaskState,
    question: &str,
    answer: &str,
) -> TurnEvaluation {
    evaluate_turn(
        &Message::user(question, 0, 0),
        &Message::agent(answer, 1, 0),
        task,
        progress,
        Some(rsa),
    )
    .unwrap()
}

fn bound(p: u64, q: u64) -> RsaTaskState {
    RsaTaskState {
        primes: Some(KeyPrimes::new(p, q).unwrap()),
        primes_locked: true,
        ..Default::default()
    }
}

const ALL_SIX: &str = "Here is the full RSA walk-through. The public key is (e, n) and the private key is (d, n), \
where the modulus n = p * q. Choose p = 61 and q = 53, so n = 61 * 53 = 3233. \
Euler's totient is φ(n) = 60 * 52 = 3120. Pick e = 17 because gcd(17, 3120) = 1. \
The private exponent d = 2753 since 17 * 2753 mod 3120 = 1. \
Encrypting JBNU_CSAI one ASCII character at a time gives 1877, 524, 3165, 2310, 119, 641, 2680, 2790, 1486.";

#[test]
fn single_exchange_completes_every_step() {
    let task = builtin::rsa_task();
    let progress = ProgressState::for_task(&task);
    let eval = turn(&task, &progress, &RsaTaskState::default(), "Walk me through RSA encryption of JBNU_CSAI.", ALL_SIX);
    assert_eq!(eval.verdict.newly_completed, (1..=6).collect::<BTreeSet<_>>());
    assert!(eval.verdict.goal_complete);
    assert!(eval.verdict.goal_reached);
    let rsa = eval.rsa.unwrap();
    assert_eq!(rsa.e, Some(17));
    assert_eq!(rsa.d, Some(2753));
    assert_eq!(
        rsa.ciphertext,
        Some(vec![1877, 524, 3165, 2310, 119, 641, 2680, 2790, 1486])
    );
    assert!(rsa.primes_locked && rsa.e_locked && rsa.d_locked);
}

#[test]
fn re_evaluation_adds_nothing() {
    let task = builtin::rsa_task();
    let mut progress = ProgressState::for_task(&task);
    let first = turn(&task, &progress, &RsaTaskState::default(), "RSA please", ALL_SIX);
    for step in &first.verdict.newly_completed {
        progress = progress.insert_marker(*step).unwrap();
    }
    let again = turn(&task, &progress, first.rsa.as_ref().unwrap(), "RSA please", ALL_SIX);
    assert!(again.verdict.newly_completed.is_empty());
    assert!(again.verdict.goal_complete);
    assert_eq!(again.verdict.rematched.len(), 6);
}

#[test]
fn steps_can_complete_out_of_order() {
    let task = builtin::rsa_task();
    let progress = ProgressState::for_task(&task);
    let rsa = RsaTaskState::default();
    let eval = turn(&task, &progress, &rsa, "Compute the RSA modulus for primes 61 and 53.", "n = 61 * 53 = 3233");
    assert_eq!(eval.verdict.newly_completed, BTreeSet::from([2]));
    let progress = progress.insert_marker(2).unwrap();
    let eval = turn(&task, &progress, eval.rsa.as_ref().unwrap(), "What is Euler's totient here?", "φ(3233) = 3120");
    assert_eq!(eval.verdict.newly_completed, BTreeSet::from([3]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn product_check_agrees_with_oracle(i in 0usize..150, j in 0usize..150, delta in -1i64..=1) {
        let primes = sieve(1000);
        let (p, q) = (primes[i + 10], primes[j + 10]);
        prop_assume!(p != q);
        let claimed = (p * q) as i64 + delta;
        let task = builtin::rsa_task();
        let progress = ProgressState::for_task(&task);
        let eval = turn(&task, &progress, &RsaTaskState::default(), "RSA modulus?", &format!("n = {p} * {q} = {claimed}"));
        prop_assert_eq!(eval.verdict.newly_completed.contains(&2), claimed as u64 == p * q);
    }

    #[test]
    fn totient_check_agrees_with_oracle(i in 0usize..150, j in 0usize..150, delta in -1i64..=1) {
        let primes = sieve(1000);
        let (p, q) = (primes[i + 10], primes[j + 10]);
        prop_assume!(p != q);
        let claimed = ((p - 1) * (q - 1)) as i64 + delta;
        let task = builtin::rsa_task();
        let progress = ProgressState::for_task(&task).insert_marker(2).unwrap();
        let eval = turn(&task, &progress, &bound(p, q), "Euler's totient?", &format!("φ(n) = {claimed}"));
        prop_assert_eq!(eval.verdict.newly_completed.contains(&3), claimed as u64 == (p - 1) * (q - 1));
    }

    #[test]
    fn public_exponent_check_agrees_with_oracle(i in 0usize..150, j in 0usize..150, e in 2u64..200) {
        let primes = sieve(1000);
        let (p, q) = (primes[i + 10], primes[j + 10]);
        prop_assume!(p != q);
        let phi = (p - 1) * (q - 1);
        let task = builtin::rsa_task();
        let progress = ProgressState::for_task(&task);
        let eval = turn(&task, &progress, &bound(p, q), "Which public exponent?", &format!("Take e = {e}."));
        let oracle = e > 1 && e < phi && euclid(e, phi) == 1;
        prop_assert_eq!(eval.verdict.newly_completed.contains(&4), oracle);
    }

    #[test]
    fn private_exponent_check_agrees_with_oracle(i in 0usize..150, j in 0usize..150, delta in -1i64..=1) {
        let primes = sieve(1000);
        let (p, q) = (primes[i + 10], primes[j + 10]);
        prop_assume!(p != q);
        let phi = (p - 1) * (q - 1);
        let e = (3..phi).find(|&e| euclid(e, phi) == 1).unwrap();
        let d_true = (1..phi).find(|&d| (e as u128 * d as u128) % phi as u128 == 1).unwrap();
        let d = d_true as i64 + delta;
        let mut rsa = bound(p, q);
        rsa.e = Some(e);
        rsa.e_locked = true;
        let task = builtin::rsa_task();
        let progress = ProgressState::for_task(&task);
        let eval = turn(&task, &progress, &rsa, "And the private exponent?", &format!("d = {d}"));
        let oracle = d > 1 && (d as u64) < phi && (e as u128 * d as u128) % phi as u128 == 1;
        prop_assert_eq!(eval.verdict.newly_completed.contains(&5), oracle);
    }

    #[test]
    fn encryption_check_agrees_with_oracle(i in 20usize..150, j in 20usize..150, corrupt in proptest::option::of(0usize..9)) {
        let primes = sieve(1000);
        let (p, q) = (primes[i], primes[j]);
        prop_assume!(p != q);
        let (n, phi) = (p * q, (p - 1) * (q - 1));
        let e = (3..phi).find(|&e| euclid(e, phi) == 1).unwrap();
        let mut blocks: Vec<u64> = "JBNU_CSAI".bytes().map(|b| naive_pow(b as u64, e, n)).collect();
        if let Some(k) = corrupt {
            blocks[k] = (blocks[k] + 1) % n;
        }
        let expected: Vec<u64> = "JBNU_CSAI".bytes().map(|b| naive_pow(b as u64, e, n)).collect();
        let mut rsa = bound(p, q);
        rsa.e = Some(e);
        let listing = blocks.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        let task = builtin::rsa_task();
        let progress = ProgressState::for_task(&task);
        let eval = turn(&task, &progress, &rsa, "Encrypt JBNU_CSAI with RSA", &format!("Ciphertext: {listing}"));
        prop_assert_eq!(eval.verdict.newly_completed.contains(&6), blocks == expected);
    }
}
