//! One PASS/FAIL line per acceptance criterion. Runs offline.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, StudentsT};
use tower::ServiceExt;

use common::*;
use cpg_core::analytics::stats::{
    cohens_d_independent_with, cohens_d_paired_with, independent_t_test_with, paired_t_test,
    BetweenTest, IndependentEffect, PairedEffect,
};
use cpg_core::analytics::{build_report_from_csv, synthetic, AnalysisConfig};
use cpg_core::engine::{evaluate_turn, sanitize_verdict, EvaluationVerdict};
use cpg_core::modal::ModalError;
use cpg_core::rsa::{decrypt_string, encrypt_string, mod_inverse, mod_pow};
use cpg_core::{
    advance_modal, builtin, context_window, validate_task_definition, Message, ModalChoice,
    ModalPhase, ProgressState, RawVerdict, Role, Subtask,
};
use cpg_service::gateway::{
    blocked_count, dial_count, set_network_policy, GatewayError, HttpTransport, NetworkPolicy,
    RemoteClient,
};
use cpg_service::http::router;
use cpg_service::replay::{parse_transcript, replay};
use cpg_service::session::{Condition, ServiceError, SessionStatus};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap()
}

// ---------------------------------------------------------------- ordering

fn permutations(n: u32) -> Vec<Vec<u32>> {
    fn go(rest: &mut Vec<u32>, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            go(rest, prefix, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = vec![];
    go(&mut (1..=n).collect(), &mut vec![], &mut out);
    out
}

fn marker_ordering() -> Outcome {
    let started = Instant::now();
    let perms = permutations(6);
    ensure!(perms.len() == 720, "{} permutations", perms.len());
    for perm in &perms {
        let mut state = ProgressState::new(6);
        for (k, &step) in perm.iter().enumerate() {
            state = state.insert_marker(step).map_err(|e| e.to_string())?;
            let order = state.display_order();
            ensure!(order.windows(2).all(|w| w[0] < w[1]), "{perm:?}: unsorted {order:?}");
            ensure!(order.len() == k + 1, "{perm:?}: lost a marker");
            ensure!(state.goal_marker_active() == (k == 5), "{perm:?}: goal marker at {k}");
        }
        ensure!(state.display_order() == [1, 2, 3, 4, 5, 6], "{perm:?}: final order");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("720 orders, final [1..6], every prefix sorted, {elapsed:.1?}"))
}

fn context_window_law() -> Outcome {
    for len in 0..=25usize {
        let history: Vec<Message> = (0..len)
            .map(|i| {
                let role = if i % 2 == 0 { Role::User } else { Role::TaskAgent };
                Message::new(role, format!("m{i}"), i as u64, i as i64)
            })
            .collect();
        let w = context_window(&history);
        let k = len.min(10);
        ensure!(w.len() == k, "len {len}: window {}", w.len());
        ensure!(w == &history[len - k..], "len {len}: wrong messages");
    }
    Ok("lengths 0..25 give the min(10, len) latest messages".into())
}

fn task_bounds() -> Outcome {
    let base = builtin::rsa_task();
    for n in 2..=8u32 {
        let mut def = base.clone();
        def.subtasks = (1..=n)
            .map(|step| Subtask {
                step,
                label: format!("Step {step}"),
                ..base.subtasks[1].clone()
            })
            .collect();
        let json = serde_json::to_string(&def).unwrap();
        let accepted = cpg_core::TaskDefinition::from_json(&json).is_ok();
        ensure!(accepted == (3..=7).contains(&n), "{n} subtasks accepted = {accepted}");
        ensure!(
            validate_task_definition(&def).is_ok() == accepted,
            "validator and loader disagree at {n}"
        );
    }
    Ok("2 and 8 subtasks rejected, 3 to 7 accepted".into())
}

// ---------------------------------------------------------------- RSA

fn trial_prime(x: u64) -> bool {
    x >= 2 && (2..).take_while(|d| d * d <= x).all(|d| x % d != 0)
}

fn euclid(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        euclid(b, a % b)
    }
}

fn naive_pow(b: u64, e: u64, m: u64) -> u64 {
    (0..e).fold(1 % m, |acc, _| ((acc as u128 * b as u128) % m as u128) as u64)
}

fn rsa_oracle(rt: &tokio::runtime::Runtime) -> Outcome {
    let started = Instant::now();
    let primes: Vec<u64> = (17..46_000).filter(|&x| trial_prime(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut cases = 0;
    while cases < 500 {
        let p = primes[rng.gen_range(0..primes.len())];
        let q = primes[rng.gen_range(0..primes.len())];
        let n = p * q;
        if p == q || n >= 1 << 31 {
            continue;
        }
        let phi = (p - 1) * (q - 1);
        let e = loop {
            let e = rng.gen_range(3..phi);
            if euclid(e, phi) == 1 {
                break e;
            }
        };
        let d = mod_inverse(e, phi).map_err(|err| format!("{err} for e={e} phi={phi}"))?;
        ensure!((e as u128 * d as u128) % phi as u128 == 1, "inverse of {e} mod {phi}");
        let m = rng.gen_range(0..n);
        let c = mod_pow(m, e, n).unwrap();
        ensure!(mod_pow(c, d, n).unwrap() == m, "round trip {m} with p={p} q={q} e={e}");
        let text: String = (0..rng.gen_range(1..12))
            .map(|_| rng.gen_range(32u8..127) as char)
            .collect();
        let blocks = encrypt_string(&text, e, n).unwrap();
        ensure!(decrypt_string(&blocks, d, n).unwrap() == text, "string round trip {text:?}");
        let (base, exp) = (rng.gen_range(0..n), rng.gen_range(0..=20));
        ensure!(mod_pow(base, exp, n).unwrap() == naive_pow(base, exp, n), "{base}^{exp} mod {n}");
        cases += 1;
    }

    // golden values, checked by brute force before use
    ensure!(trial_prime(61) && trial_prime(53), "golden primes");
    let (n, phi) = (61 * 53, 60 * 52);
    ensure!(n == 3233 && phi == 3120 && euclid(17, phi) == 1, "golden key");
    let d = (1..phi).find(|d| 17 * d % phi == 1).unwrap();
    ensure!(d == 2753, "brute-force d = {d}");

    let lines = parse_transcript(&read_fixture("rsa_golden.jsonl")).unwrap();
    let outcome = rt
        .block_on(replay(builtin::rsa_task(), &lines))
        .map_err(|e| e.to_string())?;
    let done = outcome.state.progress.completed_steps();
    ensure!(done.len() == 6, "golden transcript completed {done:?}");
    let rsa = outcome.state.rsa.clone().unwrap();
    let cipher = rsa.ciphertext.ok_or("no ciphertext bound")?;
    let plain = decrypt_string(&cipher, d, n).unwrap();
    ensure!(plain == "JBNU_CSAI", "golden decrypts to {plain:?}");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "500 random keys, golden transcript completes 6/6 and decrypts to JBNU_CSAI, {elapsed:.1?}"
    ))
}

// ---------------------------------------------------------------- modal

fn modal_protocol(rt: &tokio::runtime::Runtime) -> Outcome {
    let v = |goal_complete, goal_reached| EvaluationVerdict {
        relevant: true,
        goal_complete,
        goal_reached,
        ..Default::default()
    };
    let mut phase = ModalPhase::None;
    ensure!(
        advance_modal(phase, None, Some(ModalChoice::Continue))
            == Err(ModalError::ChoiceWithoutPrompt(ModalPhase::None)),
        "choice without prompt accepted"
    );
    phase = advance_modal(phase, Some(&v(true, true)), None).unwrap();
    ensure!(phase == ModalPhase::Prompting, "no prompt on goal completion");
    phase = advance_modal(phase, None, Some(ModalChoice::Continue)).unwrap();
    ensure!(phase == ModalPhase::DismissedContinue, "continue");
    ensure!(
        advance_modal(phase, Some(&v(true, false)), None).unwrap() == ModalPhase::DismissedContinue,
        "re-prompted without re-completion"
    );
    ensure!(
        advance_modal(phase, None, Some(ModalChoice::Exit)).is_err(),
        "exit accepted while dismissed"
    );
    phase = advance_modal(phase, Some(&v(true, true)), None).unwrap();
    ensure!(phase == ModalPhase::Prompting, "no re-prompt on re-completion");
    phase = advance_modal(phase, None, Some(ModalChoice::Exit)).unwrap();
    ensure!(phase == ModalPhase::Exited, "exit");

    rt.block_on(async {
        let h = harness();
        let id = h.service.create_session("rsa-encryption", Condition::Cpg).await.unwrap().session_id;
        let q = golden_questions();
        for text in &q {
            h.service.submit_turn(&id, text).await.map_err(|e| e.to_string())?;
        }
        let s = h.service.state(&id).await.unwrap();
        ensure!(s.modal == ModalPhase::Prompting, "service did not prompt: {:?}", s.modal);
        ensure!(
            matches!(h.service.submit_turn(&id, "x").await, Err(ServiceError::ModalPending(_))),
            "turn accepted while prompting"
        );
        h.service.respond_modal(&id, ModalChoice::Continue).await.unwrap();
        h.service.submit_turn(&id, &q[0]).await.unwrap();
        ensure!(h.service.state(&id).await.unwrap().modal == ModalPhase::DismissedContinue, "re-prompted on an unrelated exchange");
        h.service.submit_turn(&id, &q[5]).await.unwrap();
        let s = h.service.state(&id).await.unwrap();
        ensure!(s.modal == ModalPhase::Prompting && s.progress.goal_reached_count() == 2, "no re-prompt after redoing the encryption");
        h.service.respond_modal(&id, ModalChoice::Exit).await.unwrap();
        let s = h.service.state(&id).await.unwrap();
        ensure!(s.status == SessionStatus::Completed, "exit did not complete the session");
        ensure!(
            matches!(h.service.respond_modal(&id, ModalChoice::Exit).await, Err(ServiceError::SessionNotActive(_))),
            "choice after exit"
        );
        Ok("none -> prompting -> continue -> re-completion -> prompting -> exit, stray choices rejected".to_string())
    })
}

// ---------------------------------------------------------------- determinism

fn determinism(rt: &tokio::runtime::Runtime) -> Outcome {
    let mut scenarios = 0;
    for fixture_name in ["rsa_golden.jsonl", "rsa_out_of_order.jsonl"] {
        let lines = parse_transcript(&read_fixture(fixture_name)).unwrap();
        let a = rt.block_on(replay(builtin::rsa_task(), &lines)).unwrap();
        let b = rt.block_on(replay(builtin::rsa_task(), &lines)).unwrap();
        ensure!(a.events_jsonl() == b.events_jsonl(), "{fixture_name}: event logs differ");
        ensure!(a.timeline_jsonl() == b.timeline_jsonl(), "{fixture_name}: timelines differ");
        let rebuilt = cpg_service::session::SessionState::rebuild(&a.events, |_| Some(Arc::new(builtin::rsa_task())))
            .map_err(|e| e.to_string())?;
        ensure!(rebuilt == a.state, "{fixture_name}: rebuild differs");
        scenarios += 1;
    }

    rt.block_on(async {
        let dir = tempfile::tempdir().unwrap();
        let stores: Vec<Arc<dyn cpg_service::session::EventStore>> = vec![
            Arc::new(cpg_service::session::MemoryStore::default()),
            Arc::new(cpg_service::session::JsonlStore::open(dir.path()).unwrap()),
        ];
        for store in stores {
            let h = harness_with(store);
            let q = golden_questions();
            for condition in [Condition::Cpg, Condition::Control] {
                let id = h.service.create_session("rsa-encryption", condition).await.unwrap().session_id;
                for text in &q {
                    h.service.submit_turn(&id, text).await.unwrap();
                    let live = h.service.state(&id).await.unwrap();
                    ensure!(live == h.service.rebuild(&id).unwrap(), "{condition:?} diverged after {text:?}");
                }
                if condition == Condition::Cpg {
                    h.service.respond_modal(&id, ModalChoice::Continue).await.unwrap();
                    h.service.submit_turn(&id, &q[5]).await.unwrap();
                    h.service.respond_modal(&id, ModalChoice::Exit).await.unwrap();
                }
                ensure!(h.service.state(&id).await.unwrap() == h.service.rebuild(&id).unwrap(), "{condition:?} diverged at the end");
                scenarios += 1;
            }
            let idle = h.service.create_session("rsa-encryption", Condition::Cpg).await.unwrap().session_id;
            h.service.record_user_message(&idle, "hello?").await.unwrap();
            h.clock.advance(4_000_000);
            let _ = h.service.submit_turn(&idle, "hello?").await;
            let s = h.service.state(&idle).await.unwrap();
            ensure!(s.status == SessionStatus::Abandoned, "idle session still {:?}", s.status);
            ensure!(s == h.service.rebuild(&idle).unwrap(), "idle session diverged");
            scenarios += 1;
        }
        Ok(())
    })?;
    Ok(format!("replays byte-identical, rebuild = live in {scenarios} scenarios"))
}

// ---------------------------------------------------------------- control opacity

const HIDDEN_KEYS: &[&str] = &[
    "progress", "markers", "step", "steps", "displayOrder", "goalReachedCount", "completedSteps",
    "newlyCompleted", "rematched", "subtaskCompletions", "modal", "oracle", "label",
];
const HIDDEN_WORDS: &[&str] = &[
    "subtask-completed", "goal-prompted", "prompting", "dismissed-continue", "Prompting", "DismissedContinue",
];

fn leaks(value: &Value, labels: &[String], path: &str, found: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                if HIDDEN_KEYS.contains(&k.as_str()) {
                    found.push(format!("{path}.{k}"));
                }
                leaks(v, labels, &format!("{path}.{k}"), found);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                leaks(v, labels, &format!("{path}[{i}]"), found);
            }
        }
        Value::String(s) => {
            if labels.iter().any(|l| l == s) || HIDDEN_WORDS.iter().any(|w| s.contains(w)) {
                found.push(format!("{path} = {s:?}"));
            }
        }
        _ => {}
    }
}

async fn request(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

async fn sse_payloads(app: &axum::Router, id: &str) -> Vec<Value> {
    let req = Request::get(format!("/sessions/{id}/events")).body(Body::empty()).unwrap();
    let mut body = app.clone().oneshot(req).await.unwrap().into_body();
    let mut text = String::new();
    while let Ok(Some(Ok(frame))) = tokio::time::timeout(Duration::from_millis(300), body.frame()).await {
        if let Ok(data) = frame.into_data() {
            text.push_str(std::str::from_utf8(&data).unwrap());
        }
    }
    let mut out: Vec<Value> = text
        .lines()
        .filter_map(|l| l.strip_prefix("data: "))
        .map(|d| serde_json::from_str(d).unwrap())
        .collect();
    out.extend(text.lines().filter_map(|l| l.strip_prefix("event: ")).map(|k| json!({ "sseEvent": k })));
    out
}

async fn session_payloads(condition: &str) -> (Vec<Value>, Vec<String>) {
    let h = harness();
    let app = router(h.service.clone());
    let mut payloads = vec![request(&app, "GET", "/tasks", None).await];
    let created = request(&app, "POST", "/sessions", Some(json!({"taskId": "rsa-encryption", "condition": condition}))).await;
    let id = created["sessionId"].as_str().unwrap().to_string();
    payloads.push(created);
    let q = golden_questions();
    for text in q.iter().chain([&q[5], &q[0]]) {
        payloads.push(request(&app, "POST", &format!("/sessions/{id}/messages"), Some(json!({ "text": text }))).await);
        if condition == "cpg" {
            payloads.push(request(&app, "POST", &format!("/sessions/{id}/modal"), Some(json!({"choice": "continue"}))).await);
        }
    }
    if condition == "control" {
        payloads.push(request(&app, "POST", &format!("/sessions/{id}/modal"), Some(json!({"choice": "continue"}))).await);
        payloads.push(request(&app, "POST", &format!("/sessions/{id}/modal"), Some(json!({"choice": "exit"}))).await);
    }
    payloads.push(request(&app, "GET", &format!("/sessions/{id}"), None).await);
    payloads.push(request(&app, "GET", &format!("/sessions/{id}/metrics"), None).await);
    payloads.push(request(&app, "GET", &format!("/metrics?condition={condition}"), None).await);
    payloads.extend(sse_payloads(&app, &id).await);
    payloads.push(request(&app, "POST", &format!("/sessions/{id}/end"), None).await);
    let labels = builtin::rsa_task().subtasks.iter().map(|s| s.label.clone()).collect();
    (payloads, labels)
}

fn control_opacity(rt: &tokio::runtime::Runtime) -> Outcome {
    let (payloads, labels) = rt.block_on(session_payloads("control"));
    let mut found = vec![];
    for (i, p) in payloads.iter().enumerate() {
        leaks(p, &labels, &format!("payload{i}"), &mut found);
    }
    ensure!(found.is_empty(), "control payloads expose {found:?}");
    let (cpg, labels) = rt.block_on(session_payloads("cpg"));
    let mut seen = vec![];
    for (i, p) in cpg.iter().enumerate() {
        leaks(p, &labels, &format!("payload{i}"), &mut seen);
    }
    ensure!(!seen.is_empty(), "scanner finds nothing even in a cpg session");
    Ok(format!(
        "{} control payloads clean (same scan flags {} items in a cpg session)",
        payloads.len(),
        seen.len()
    ))
}

// ---------------------------------------------------------------- offline

fn offline_guard(rt: &tokio::runtime::Runtime) -> Outcome {
    let before = blocked_count();
    std::env::set_var("CPG_ACCEPTANCE_PROBE_KEY", "probe");
    let probe = RemoteClient::new("http://127.0.0.1:9/v1/chat", "CPG_ACCEPTANCE_PROBE_KEY", Arc::new(HttpTransport::default()));
    let result = rt.block_on(probe.chat(&[]));
    ensure!(matches!(result, Err(GatewayError::NetworkDisabled)), "guard let a request through: {result:?}");
    ensure!(blocked_count() == before + 1, "probe not counted");
    ensure!(dial_count() == 0, "{} network dials", dial_count());
    Ok(format!("0 dials across the suite, guard refused {} probe", blocked_count()))
}

// ---------------------------------------------------------------- statistics

mod oracle {
    use super::*;

    pub fn mean(x: &[f64]) -> f64 {
        let mut s = 0.0;
        for v in x {
            s += v;
        }
        s / x.len() as f64
    }

    pub fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        let mut s = 0.0;
        for v in x {
            s += (v - m) * (v - m);
        }
        s / (x.len() as f64 - 1.0)
    }

    pub fn p(t: f64, df: f64) -> f64 {
        2.0 * StudentsT::new(0.0, 1.0, df).unwrap().sf(t.abs())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

fn statistics() -> Outcome {
    use oracle::*;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.gen_range(2..=14);
        let m = rng.gen_range(2..=14);
        let pre: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64 + rng.gen::<f64>()).collect();
        let post: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64 + 2.0 * rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(1..=5) as f64 + rng.gen::<f64>()).collect();
        let diff: Vec<f64> = pre.iter().zip(&post).map(|(x, y)| y - x).collect();
        let nf = n as f64;
        let mf = m as f64;

        let t = mean(&diff) / (var(&diff) / nf).sqrt();
        let r = paired_t_test(&pre, &post).map_err(|e| e.to_string())?;
        ensure!(close(r.t, t) && close(r.p, p(t, nf - 1.0)) && r.df == nf - 1.0, "paired {pre:?} {post:?}");

        let (va, vb) = (var(&pre), var(&b));
        let se = (va / nf + vb / mf).sqrt();
        let t = (mean(&pre) - mean(&b)) / se;
        let df = (va / nf + vb / mf).powi(2) / ((va / nf).powi(2) / (nf - 1.0) + (vb / mf).powi(2) / (mf - 1.0));
        let r = independent_t_test_with(BetweenTest::Welch, &pre, &b).unwrap();
        ensure!(close(r.t, t) && close(r.p, p(t, df)) && close(r.df, df), "welch {pre:?} {b:?}");

        let pooled = ((nf - 1.0) * va + (mf - 1.0) * vb) / (nf + mf - 2.0);
        let t = (mean(&pre) - mean(&b)) / (pooled * (1.0 / nf + 1.0 / mf)).sqrt();
        let r = independent_t_test_with(BetweenTest::Student, &pre, &b).unwrap();
        ensure!(close(r.t, t) && close(r.p, p(t, nf + mf - 2.0)), "student {pre:?} {b:?}");

        let d = cohens_d_paired_with(PairedEffect::DiffSd, &pre, &post).unwrap();
        ensure!(close(d, mean(&diff) / var(&diff).sqrt()), "paired d");
        let d = cohens_d_paired_with(PairedEffect::AverageSd, &pre, &post).unwrap();
        ensure!(close(d, mean(&diff) / ((va.sqrt() + var(&post).sqrt()) / 2.0)), "paired d (average SD)");
        let d = cohens_d_independent_with(IndependentEffect::PooledSd, &pre, &b).unwrap();
        ensure!(close(d, (mean(&b) - mean(&pre)) / pooled.sqrt()), "independent d");
        let d = cohens_d_independent_with(IndependentEffect::GlassDelta, &pre, &b).unwrap();
        ensure!(close(d, (mean(&b) - mean(&pre)) / va.sqrt()), "Glass delta");
        checked += 1;
    }

    let a = [2.0, 3.0, 5.0, 4.0, 1.0];
    for kind in [BetweenTest::Welch, BetweenTest::Student] {
        let r = independent_t_test_with(kind, &a, &a).unwrap();
        ensure!(r.t == 0.0 && (r.p - 1.0).abs() < 1e-12, "a = b gives t={} p={}", r.t, r.p);
    }
    let r = paired_t_test(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
    ensure!(r.t == 0.0 && (r.p - 1.0).abs() < 1e-12, "zero mean difference gives t={} p={}", r.t, r.p);

    let study = synthetic::generate(5);
    let report = build_report_from_csv(&study.surveys_csv, Some(&study.metrics_csv), AnalysisConfig::default())
        .map_err(|e| e.to_string())?;
    let table = report.render_effect_size_table();
    let rows: Vec<&str> = table.lines().collect();
    ensure!(rows.len() == 4, "table has {} lines:\n{table}", rows.len());
    let header: Vec<&str> = rows[1].split_whitespace().collect();
    ensure!(header == ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6"], "header {header:?}");
    for (row, name) in rows[2..].iter().zip(["Experimental group", "Control group"]) {
        ensure!(row.starts_with(name), "row {row:?}");
        let cells: Vec<&str> = row[name.len()..].split_whitespace().collect();
        ensure!(cells.len() == 6, "row {name} has {} cells", cells.len());
        ensure!(
            cells.iter().all(|c| c.split('.').nth(1).is_some_and(|f| f.len() == 3)),
            "cells not rounded to 3 places: {cells:?}"
        );
    }
    Ok("1000 samples within 1e-9 (t, p, df, 4 effect sizes), a = b gives t = 0 and p = 1, 2x6 effect-size table".into())
}

// ---------------------------------------------------------------- engine

fn engine_idempotence() -> Outcome {
    let task = builtin::rsa_task();
    let lines = parse_transcript(&read_fixture("rsa_golden.jsonl")).unwrap();
    let pairs: Vec<(&str, &str)> = lines.chunks(2).map(|c| (c[0].text.as_str(), c[1].text.as_str())).collect();
    let mut progress = ProgressState::for_task(&task);
    let mut rsa = cpg_core::RsaTaskState::default();
    for (q, a) in &pairs {
        let eval = evaluate_turn(&Message::user(*q, 0, 0), &Message::agent(*a, 1, 0), &task, &progress, Some(&rsa))
            .map_err(|e| e.to_string())?;
        for s in &eval.verdict.newly_completed {
            progress = progress.insert_marker(*s).unwrap();
        }
        rsa = eval.rsa.unwrap();
        let again = evaluate_turn(&Message::user(*q, 0, 0), &Message::agent(*a, 1, 0), &task, &progress, Some(&rsa))
            .map_err(|e| e.to_string())?;
        ensure!(again.verdict.newly_completed.is_empty(), "re-evaluating {q:?} completed {:?}", again.verdict.newly_completed);
        ensure!(again.rsa.as_ref() == Some(&rsa), "re-evaluation changed the bindings");
    }
    ensure!(progress.completed_steps().len() == 6, "golden exchanges completed {:?}", progress.completed_steps());

    let partial = ProgressState::for_task(&task).insert_marker(2).unwrap().insert_marker(4).unwrap();
    let raw = RawVerdict { relevant: true, completed_steps: vec![-1, 0, 2, 3, 4, 7, 99, 3] };
    let v = sanitize_verdict(&raw, &task, &partial);
    ensure!(v.newly_completed.iter().eq([3].iter()), "newly completed {:?}", v.newly_completed);
    ensure!(v.rematched.iter().eq([2, 4].iter()), "rematched {:?}", v.rematched);
    let irrelevant = sanitize_verdict(&RawVerdict { relevant: false, completed_steps: vec![1, 3] }, &task, &partial);
    ensure!(irrelevant.newly_completed.is_empty(), "irrelevant verdict completed steps");
    Ok("golden exchanges re-evaluate to nothing new, out-of-range and repeated judge steps dropped".into())
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let ms = started.elapsed().as_millis();
    match result {
        Ok(detail) => {
            println!("PASS  {name:<28} {detail} [{ms} ms]");
            true
        }
        Err(why) => {
            println!("FAIL  {name:<28} {why} [{ms} ms]");
            false
        }
    }
}

fn main() {
    set_network_policy(NetworkPolicy::Deny);
    let rt = runtime();
    let results = [
        run("marker-ordering", marker_ordering),
        run("context-window", context_window_law),
        run("task-definition-bounds", task_bounds),
        run("rsa-oracle", || rsa_oracle(&rt)),
        run("modal-protocol", || modal_protocol(&rt)),
        run("determinism-event-sourcing", || determinism(&rt)),
        run("control-opacity", || control_opacity(&rt)),
        run("statistics-oracles", statistics),
        run("engine-idempotence", engine_idempotence),
        run("offline-guarantee", || offline_guard(&rt)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
