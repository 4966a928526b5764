//! `cpg` subcommands.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use cpg_core::analytics::{build_report_from_csv, synthetic, AnalysisConfig};
use cpg_core::TaskDefinition;

use crate::config::ServiceConfig;
use crate::gateway::{FeedbackBackend, TaskAgent};
use crate::replay::{parse_transcript, replay};
use crate::session::{JsonlStore, SessionService};

#[derive(Parser, Debug)]
#[command(name = "cpg", version, about = "Conversation progress guide service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Re-evaluate a recorded transcript and print the progress timeline.
    Replay {
        /// Id of a bundled task, or of the task in --task-file.
        #[arg(long)]
        task: String,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        task_file: Option<PathBuf>,
        /// Also write the full event log (JSONL).
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Analyse survey responses and session metrics.
    Stats(StatsArgs),
    /// Write a synthetic survey and metrics data set.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Survey CSV: participant,group,phase,instrument,item1..itemN
    #[arg(long)]
    pub input: PathBuf,
    /// Text report destination.
    #[arg(long)]
    pub report: PathBuf,
    /// Session metrics CSV exported by the service.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Machine-readable results.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Effect sizes, one row per group and one column per question.
    #[arg(long)]
    pub effect_sizes: Option<PathBuf>,
    /// Chart series as JSON.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// welch | student
    #[arg(long, default_value = "welch")]
    pub between: String,
    /// diff-sd | average-sd
    #[arg(long, default_value = "diff-sd")]
    pub paired_effect: String,
    /// pooled-sd | glass-delta
    #[arg(long, default_value = "pooled-sd")]
    pub independent_effect: String,
}

fn kebab<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .with_context(|| format!("invalid value {value:?} for --{flag}"))
}

pub async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config, port, host } => serve(config, &host, port).await,
        Command::Replay {
            task,
            transcript,
            task_file,
            events,
        } => {
            let out = run_replay(&task, &transcript, task_file.as_deref(), events.as_deref()).await?;
            print!("{out}");
            Ok(())
        }
        Command::Stats(args) => {
            let summary = run_stats(&args)?;
            println!("{summary}");
            Ok(())
        }
        Command::Synth { seed, out_dir } => {
            std::fs::create_dir_all(&out_dir)?;
            let study = synthetic::generate(seed);
            std::fs::write(out_dir.join("surveys.csv"), study.surveys_csv)?;
            std::fs::write(out_dir.join("metrics.csv"), study.metrics_csv)?;
            println!("wrote {}", out_dir.display());
            Ok(())
        }
    }
}

pub fn build_service(config: &ServiceConfig) -> Result<SessionService> {
    let tasks = config.tasks()?;
    let agent = TaskAgent::from_config(&config.task_agent)?;
    let feedback = FeedbackBackend::from_config(&config.feedback)?;
    let store = JsonlStore::open(&config.data_dir)
        .with_context(|| format!("opening {}", config.data_dir.display()))?;
    let service = SessionService::new(tasks, agent, feedback, Arc::new(store))
        .with_idle_timeout_secs(config.session_timeout_secs)
        .with_system_prompt(config.system_prompt.clone());
    let restored = service.restore()?;
    tracing::info!(restored, "sessions loaded");
    Ok(service)
}

async fn serve(config: PathBuf, host: &str, port: u16) -> Result<()> {
    let config = ServiceConfig::load(&config)?;
    let service = Arc::new(build_service(&config)?);
    let addr: SocketAddr = format!("{host}:{port}").parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, crate::http::router(service)).await?;
    Ok(())
}

/// Returns the timeline as JSONL.
pub async fn run_replay(
    task_id: &str,
    transcript: &std::path::Path,
    task_file: Option<&std::path::Path>,
    events_out: Option<&std::path::Path>,
) -> Result<String> {
    let mut tasks = cpg_core::builtin::all();
    if let Some(path) = task_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        tasks.push(TaskDefinition::from_json(&text)?);
    }
    let Some(task) = tasks.into_iter().find(|t| t.id == task_id) else {
        bail!("unknown task {task_id:?}");
    };
    let text = std::fs::read_to_string(transcript)
        .with_context(|| format!("reading {}", transcript.display()))?;
    let lines = parse_transcript(&text)?;
    let outcome = replay(task, &lines).await?;
    if let Some(path) = events_out {
        std::fs::write(path, outcome.events_jsonl())?;
    }
    Ok(outcome.timeline_jsonl())
}

/// Writes the requested outputs and returns a one-line summary.
pub fn run_stats(args: &StatsArgs) -> Result<String> {
    let config = AnalysisConfig {
        between: kebab("between", &args.between)?,
        paired_effect: kebab("paired-effect", &args.paired_effect)?,
        independent_effect: kebab("independent-effect", &args.independent_effect)?,
    };
    let surveys = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let metrics = args
        .metrics
        .as_ref()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let report = build_report_from_csv(&surveys, metrics.as_deref(), config)?;
    std::fs::write(&args.report, report.render_text())?;
    if let Some(path) = &args.csv {
        std::fs::write(path, report.render_csv())?;
    }
    if let Some(path) = &args.effect_sizes {
        std::fs::write(path, report.render_effect_size_csv())?;
    }
    if let Some(path) = &args.plot_data {
        std::fs::write(path, serde_json::to_string_pretty(&report.plot_data())?)?;
    }
    let n: usize = report.participants.values().sum();
    Ok(format!("{n} participants analysed, report written to {}", args.report.display()))
}
