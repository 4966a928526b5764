//! Survey and session-metrics CSV ingestion.
//!
//! Survey schema: `participant,group,phase,instrument,item1..itemN`. Rows for
//! instruments with fewer than N items leave the trailing columns empty.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("row {row}, column {column}: {message}")]
pub struct SchemaError {
    /// 1-based line number in the file (the header is line 1).
    pub row: usize,
    pub column: String,
    pub message: String,
}

impl SchemaError {
    fn new(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            row,
            column: column.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    Control,
    Experimental,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Experimental, Group::Control];

    pub fn display_name(self) -> &'static str {
        match self {
            Group::Control => "Control group",
            Group::Experimental => "Experimental group",
        }
    }
}

impl FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" => Ok(Group::Control),
            // Sessions call the experimental condition "cpg".
            "experimental" | "cpg" => Ok(Group::Experimental),
            other => Err(format!("unknown group {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Pre,
    Post,
    PostOnly,
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pre" => Ok(Phase::Pre),
            "post" => Ok(Phase::Post),
            "post-only" => Ok(Phase::PostOnly),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instrument {
    SelfEfficacy,
    NasaTlx,
    Satisfaction,
}

impl Instrument {
    pub fn item_count(self) -> usize {
        match self {
            Instrument::SelfEfficacy | Instrument::NasaTlx => 6,
            Instrument::Satisfaction => 4,
        }
    }

    /// Inclusive score range.
    pub fn score_range(self) -> (u32, u32) {
        match self {
            Instrument::SelfEfficacy | Instrument::Satisfaction => (1, 5),
            Instrument::NasaTlx => (0, 100),
        }
    }

    fn allows(self, phase: Phase) -> bool {
        match self {
            Instrument::SelfEfficacy => matches!(phase, Phase::Pre | Phase::Post),
            Instrument::NasaTlx | Instrument::Satisfaction => phase == Phase::PostOnly,
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instrument::SelfEfficacy => "self-efficacy",
            Instrument::NasaTlx => "nasa-tlx",
            Instrument::Satisfaction => "satisfaction",
        })
    }
}

impl FromStr for Instrument {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "self-efficacy" => Ok(Instrument::SelfEfficacy),
            "nasa-tlx" => Ok(Instrument::NasaTlx),
            "satisfaction" => Ok(Instrument::Satisfaction),
            other => Err(format!("unknown instrument {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SurveyResponse {
    pub participant_id: String,
    pub group: Group,
    pub phase: Phase,
    pub instrument: Instrument,
    pub items: Vec<u32>,
}

const FIXED_COLUMNS: [&str; 4] = ["participant", "group", "phase", "instrument"];

fn parse_field<T: FromStr<Err = String>>(row: usize, column: &str, raw: &str) -> Result<T, SchemaError> {
    raw.parse().map_err(|msg| SchemaError::new(row, column, msg))
}

/// Parses and validates survey responses.
pub fn parse_surveys(csv_text: &str) -> Result<Vec<SurveyResponse>, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SchemaError::new(1, "header", e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(SchemaError::new(1, "header", "file is empty"));
    }
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*expected) {
            return Err(SchemaError::new(
                1,
                expected.to_string(),
                format!("expected column {} to be {expected:?}", i + 1),
            ));
        }
    }
    let item_columns = headers.len() - FIXED_COLUMNS.len();
    for (k, name) in headers.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if name != format!("item{}", k + 1) {
            return Err(SchemaError::new(1, name, format!("expected item{}", k + 1)));
        }
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| SchemaError::new(row, "record", e.to_string()))?;
        if record.len() > headers.len() {
            return Err(SchemaError::new(row, "record", "more fields than header columns"));
        }
        let get = |i: usize| record.get(i).unwrap_or("");
        let participant = get(0).to_string();
        if participant.is_empty() {
            return Err(SchemaError::new(row, "participant", "missing participant id"));
        }
        let group: Group = parse_field(row, "group", get(1))?;
        let phase: Phase = parse_field(row, "phase", get(2))?;
        let instrument: Instrument = parse_field(row, "instrument", get(3))?;
        if !instrument.allows(phase) {
            return Err(SchemaError::new(
                row,
                "phase",
                format!("{instrument} is not collected in this phase"),
            ));
        }
        let expected = instrument.item_count();
        if expected > item_columns {
            return Err(SchemaError::new(
                row,
                format!("item{expected}"),
                format!("{instrument} needs {expected} item columns"),
            ));
        }
        let (lo, hi) = instrument.score_range();
        let mut items = Vec::with_capacity(expected);
        for k in 0..item_columns {
            let column = format!("item{}", k + 1);
            let raw = get(FIXED_COLUMNS.len() + k);
            if k >= expected {
                if !raw.is_empty() {
                    return Err(SchemaError::new(row, column, format!("{instrument} has only {expected} items")));
                }
                continue;
            }
            let score: u32 = raw
                .parse()
                .map_err(|_| SchemaError::new(row, column.clone(), format!("expected an integer score, got {raw:?}")))?;
            if !(lo..=hi).contains(&score) {
                return Err(SchemaError::new(row, column, format!("score {score} outside {lo}..={hi}")));
            }
            items.push(score);
        }
        if let Some(previous) = groups.insert(participant.clone(), group) {
            if previous != group {
                return Err(SchemaError::new(row, "group", "participant appears in both groups"));
            }
        }
        if !seen.insert((participant.clone(), phase, instrument)) {
            return Err(SchemaError::new(row, "participant", "duplicate response"));
        }
        out.push(SurveyResponse {
            participant_id: participant,
            group,
            phase,
            instrument,
            items,
        });
    }
    if out.is_empty() {
        return Err(SchemaError::new(2, "record", "no survey responses"));
    }
    Ok(out)
}

/// One row of a session-metrics export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub session: String,
    pub condition: String,
    pub task_time_secs: f64,
    pub interaction_count: u64,
    pub completed: bool,
}

impl MetricsRecord {
    pub fn group(&self) -> Option<Group> {
        self.condition.parse().ok()
    }
}

pub const METRICS_HEADER: &str = "session,condition,task_time_secs,interaction_count,completed";

pub fn parse_metrics(csv_text: &str) -> Result<Vec<MetricsRecord>, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SchemaError::new(1, "header", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>().join(",") != METRICS_HEADER {
        return Err(SchemaError::new(1, "header", format!("expected {METRICS_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (index, record) in reader.deserialize::<MetricsRecord>().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| SchemaError::new(row, "record", e.to_string()))?;
        if record.group().is_none() {
            return Err(SchemaError::new(row, "condition", format!("unknown condition {:?}", record.condition)));
        }
        if !(record.task_time_secs >= 0.0) {
            return Err(SchemaError::new(row, "task_time_secs", "task time must be non-negative"));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_metrics(records: &[MetricsRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}
