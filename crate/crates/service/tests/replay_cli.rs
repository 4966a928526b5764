mod common;

use common::*;
use cpg_core::analytics::synthetic;
use cpg_service::cli::{run_replay, run_stats, StatsArgs};
use cpg_service::replay::{parse_transcript, replay, ReplayError};

#[tokio::test]
async fn golden_transcript_timeline() {
    let lines = parse_transcript(&read_fixture("rsa_golden.jsonl")).unwrap();
    let out = replay(cpg_core::builtin::rsa_task(), &lines).await.unwrap();
    let steps: Vec<u32> = out.timeline.iter().filter_map(|t| t.step).collect();
    assert_eq!(steps, vec![1, 2, 3, 4, 5, 6]);
    let last = out.timeline.last().unwrap();
    assert_eq!(last.kind, "goal-prompted");
    assert_eq!(last.display_order, vec![1, 2, 3, 4, 5, 6]);
    assert_eq!(last.turn_index, 11);
    let rsa = out.state.rsa.unwrap();
    assert_eq!(rsa.d, Some(2753));
    assert_eq!(rsa.ciphertext, Some(vec![1877, 524, 3165, 2310, 119, 641, 2680, 2790, 1486]));
}

#[tokio::test]
async fn out_of_order_completion_is_displayed_in_order() {
    let lines = parse_transcript(&read_fixture("rsa_out_of_order.jsonl")).unwrap();
    let out = replay(cpg_core::builtin::rsa_task(), &lines).await.unwrap();
    let completed: Vec<u32> = out.timeline.iter().filter_map(|t| t.step).collect();
    assert_eq!(completed, vec![1, 3, 2, 4, 5, 6]);
    let orders: Vec<Vec<u32>> = out.timeline.iter().map(|t| t.display_order.clone()).collect();
    assert_eq!(orders[1], vec![1, 3]);
    assert_eq!(orders[2], vec![1, 2, 3]);
    assert!(orders.iter().all(|o| o.windows(2).all(|w| w[0] < w[1])));
}

#[tokio::test]
async fn replay_continues_past_the_prompt() {
    let mut text = read_fixture("rsa_golden.jsonl");
    let tail: Vec<&str> = text.lines().skip(10).collect::<Vec<_>>();
    let extra = tail.join("\n") + "\n";
    text.push_str(&extra);
    let lines = parse_transcript(&text).unwrap();
    let out = replay(cpg_core::builtin::rsa_task(), &lines).await.unwrap();
    let prompts: Vec<u32> = out
        .timeline
        .iter()
        .filter(|t| t.kind == "goal-prompted")
        .map(|t| t.goal_reached_count)
        .collect();
    assert_eq!(prompts, vec![1, 2]);
}

#[test]
fn malformed_lines_are_reported_with_their_number() {
    let text = "{\"role\":\"user\",\"text\":\"hi\"}\n\n{\"role\":\"wizard\",\"text\":\"x\"}\n";
    match parse_transcript(text) {
        Err(ReplayError::MalformedTranscript { line, .. }) => assert_eq!(line, 3),
        other => panic!("{:?}", other.map(|_| ())),
    }
    assert!(parse_transcript("not json").is_err());
}

#[tokio::test]
async fn reply_without_question_is_malformed() {
    let lines = parse_transcript("{\"role\":\"task-agent\",\"text\":\"hello\"}\n").unwrap();
    assert!(matches!(
        replay(cpg_core::builtin::rsa_task(), &lines).await,
        Err(ReplayError::MalformedTranscript { line: 1, .. })
    ));
}

#[tokio::test]
async fn replay_command_writes_timeline_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.jsonl");
    let a = run_replay("rsa-encryption", &fixture("rsa_golden.jsonl"), None, Some(&events)).await.unwrap();
    let b = run_replay("rsa-encryption", &fixture("rsa_golden.jsonl"), None, None).await.unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 7);
    let log = std::fs::read_to_string(&events).unwrap();
    assert!(log.lines().next().unwrap().contains("\"kind\":\"session-created\""));
    assert!(run_replay("nope", &fixture("rsa_golden.jsonl"), None, None).await.is_err());
}

#[test]
fn stats_command_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let study = synthetic::generate(11);
    let input = dir.path().join("surveys.csv");
    let metrics = dir.path().join("metrics.csv");
    std::fs::write(&input, &study.surveys_csv).unwrap();
    std::fs::write(&metrics, &study.metrics_csv).unwrap();
    let args = StatsArgs {
        input,
        report: dir.path().join("report.txt"),
        metrics: Some(metrics),
        csv: Some(dir.path().join("results.csv")),
        effect_sizes: Some(dir.path().join("effects.csv")),
        plot_data: Some(dir.path().join("plot.json")),
        between: "student".into(),
        paired_effect: "diff-sd".into(),
        independent_effect: "pooled-sd".into(),
    };
    let summary = run_stats(&args).unwrap();
    assert!(summary.starts_with("22 participants"), "{summary}");
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("Experimental group"));
    let effects = std::fs::read_to_string(dir.path().join("effects.csv")).unwrap();
    assert!(effects.lines().next().unwrap().contains("Q6"));
    let plot: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plot.json")).unwrap()).unwrap();
    assert!(plot["figures"].as_array().unwrap().len() >= 3);

    let bad = StatsArgs { between: "bayesian".into(), ..args };
    assert!(run_stats(&bad).unwrap_err().to_string().contains("--between"));
}
