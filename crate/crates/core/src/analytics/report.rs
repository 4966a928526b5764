//! Study report: per-item descriptives, t-tests and effect sizes laid out
//! like the usual pre/post self-efficacy analysis (one effect-size row per
//! group, one column per question).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{
    self, BetweenTest, IndependentEffect, PairedEffect, StatsError, TTest,
};
use super::survey::{self, Group, Instrument, MetricsRecord, Phase, SchemaError, SurveyResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisConfig {
    pub between: BetweenTest,
    pub paired_effect: PairedEffect,
    pub independent_effect: IndependentEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            n: xs.len(),
            mean: (!xs.is_empty()).then(|| stats::mean(xs)),
            sd: (xs.len() >= 2).then(|| stats::std_dev(xs)),
        }
    }
}

/// Pre/post comparison of one self-efficacy item within one group.
/// The paired scores are kept so every effect size can be audited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrePostItem {
    pub group: Group,
    pub item: usize,
    pub pre: Summary,
    pub post: Summary,
    pub test: Option<TTest>,
    pub effect_size: Option<f64>,
    pub note: Option<String>,
    pub participants: Vec<String>,
    pub pre_scores: Vec<f64>,
    pub post_scores: Vec<f64>,
}

/// Control vs experimental comparison of one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BetweenItem {
    pub measure: String,
    pub control: Summary,
    pub experimental: Summary,
    pub test: Option<TTest>,
    pub effect_size: Option<f64>,
    pub note: Option<String>,
    pub control_scores: Vec<f64>,
    pub experimental_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    pub config: AnalysisConfig,
    pub paired_formula: String,
    pub independent_formula: String,
    pub participants: BTreeMap<String, usize>,
    pub self_efficacy: Vec<PrePostItem>,
    pub pre_task_equivalence: Vec<BetweenItem>,
    pub cognitive_load: Vec<BetweenItem>,
    pub satisfaction: Vec<BetweenItem>,
    pub session_metrics: Vec<BetweenItem>,
}

fn note(err: StatsError) -> String {
    err.to_string()
}

fn between(config: &AnalysisConfig, measure: String, control: Vec<f64>, experimental: Vec<f64>) -> BetweenItem {
    let test = stats::independent_t_test_with(config.between, &control, &experimental);
    let effect = stats::cohens_d_independent_with(config.independent_effect, &control, &experimental);
    let note = test.as_ref().err().or(effect.as_ref().err()).cloned().map(note);
    BetweenItem {
        measure,
        control: Summary::of(&control),
        experimental: Summary::of(&experimental),
        test: test.ok(),
        effect_size: effect.ok(),
        note,
        control_scores: control,
        experimental_scores: experimental,
    }
}

type Scores<'a> = BTreeMap<&'a str, &'a [u32]>;

/// Scores keyed by participant id, which makes the report independent of row order.
fn scores<'a>(rows: &'a [SurveyResponse], group: Group, phase: Phase, instrument: Instrument) -> Scores<'a> {
    rows.iter()
        .filter(|r| r.group == group && r.phase == phase && r.instrument == instrument)
        .map(|r| (r.participant_id.as_str(), r.items.as_slice()))
        .collect()
}

fn column(scores: &Scores<'_>, item: usize) -> Vec<f64> {
    scores.values().map(|items| f64::from(items[item])).collect()
}

fn between_instrument(
    config: &AnalysisConfig,
    rows: &[SurveyResponse],
    phase: Phase,
    instrument: Instrument,
) -> Vec<BetweenItem> {
    let control = scores(rows, Group::Control, phase, instrument);
    let experimental = scores(rows, Group::Experimental, phase, instrument);
    if control.is_empty() && experimental.is_empty() {
        return Vec::new();
    }
    (0..instrument.item_count())
        .map(|i| {
            between(
                config,
                format!("{instrument} Q{}", i + 1),
                column(&control, i),
                column(&experimental, i),
            )
        })
        .collect()
}

pub fn build_report(
    responses: &[SurveyResponse],
    metrics: &[MetricsRecord],
    config: AnalysisConfig,
) -> StatsReport {
    let mut participants = BTreeMap::new();
    for group in Group::ALL {
        let ids: std::collections::BTreeSet<&str> = responses
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.participant_id.as_str())
            .collect();
        participants.insert(group.display_name().to_string(), ids.len());
    }

    let mut self_efficacy = Vec::new();
    for group in Group::ALL {
        let pre = scores(responses, group, Phase::Pre, Instrument::SelfEfficacy);
        let post = scores(responses, group, Phase::Post, Instrument::SelfEfficacy);
        let paired: Vec<(&str, &[u32], &[u32])> = pre
            .iter()
            .filter_map(|(id, a)| post.get(id).map(|b| (*id, *a, *b)))
            .collect();
        if pre.is_empty() && post.is_empty() {
            continue;
        }
        for item in 0..Instrument::SelfEfficacy.item_count() {
            let pre_scores: Vec<f64> = paired.iter().map(|(_, a, _)| f64::from(a[item])).collect();
            let post_scores: Vec<f64> = paired.iter().map(|(_, _, b)| f64::from(b[item])).collect();
            let test = stats::paired_t_test(&pre_scores, &post_scores);
            let effect = stats::cohens_d_paired_with(config.paired_effect, &pre_scores, &post_scores);
            self_efficacy.push(PrePostItem {
                group,
                item: item + 1,
                pre: Summary::of(&pre_scores),
                post: Summary::of(&post_scores),
                note: test.as_ref().err().or(effect.as_ref().err()).cloned().map(note),
                test: test.ok(),
                effect_size: effect.ok(),
                participants: paired.iter().map(|(id, _, _)| id.to_string()).collect(),
                pre_scores,
                post_scores,
            });
        }
    }

    let pre_task_equivalence = between_instrument(&config, responses, Phase::Pre, Instrument::SelfEfficacy);
    let cognitive_load = between_instrument(&config, responses, Phase::PostOnly, Instrument::NasaTlx);
    let satisfaction = between_instrument(&config, responses, Phase::PostOnly, Instrument::Satisfaction);

    let mut session_metrics = Vec::new();
    if !metrics.is_empty() {
        let mut sorted: Vec<&MetricsRecord> = metrics.iter().collect();
        sorted.sort_by(|a, b| a.session.cmp(&b.session));
        let pick = |group: Group, f: fn(&MetricsRecord) -> f64| -> Vec<f64> {
            sorted.iter().filter(|r| r.group() == Some(group)).map(|r| f(r)).collect()
        };
        session_metrics.push(between(
            &config,
            "task time (s)".into(),
            pick(Group::Control, |r| r.task_time_secs),
            pick(Group::Experimental, |r| r.task_time_secs),
        ));
        session_metrics.push(between(
            &config,
            "interaction count".into(),
            pick(Group::Control, |r| r.interaction_count as f64),
            pick(Group::Experimental, |r| r.interaction_count as f64),
        ));
    }

    StatsReport {
        config,
        paired_formula: config.paired_effect.formula().to_string(),
        independent_formula: config.independent_effect.formula().to_string(),
        participants,
        self_efficacy,
        pre_task_equivalence,
        cognitive_load,
        satisfaction,
        session_metrics,
    }
}

/// Parses both CSV inputs and builds the report.
pub fn build_report_from_csv(
    surveys_csv: &str,
    metrics_csv: Option<&str>,
    config: AnalysisConfig,
) -> Result<StatsReport, SchemaError> {
    let responses = survey::parse_surveys(surveys_csv)?;
    let metrics = match metrics_csv {
        Some(text) => survey::parse_metrics(text)?,
        None => Vec::new(),
    };
    Ok(build_report(&responses, &metrics, config))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) => format!("{v:.digits$}"),
        None => "n/a".into(),
    }
}

fn mean_sd(s: &Summary) -> String {
    format!("{} ({})", fmt_opt(s.mean, 2), fmt_opt(s.sd, 2))
}

impl StatsReport {
    /// Effect-size matrix: one row per group, one column per self-efficacy item.
    pub fn effect_size_rows(&self) -> Vec<(Group, Vec<Option<f64>>)> {
        Group::ALL
            .iter()
            .filter_map(|&g| {
                let row: Vec<Option<f64>> = self
                    .self_efficacy
                    .iter()
                    .filter(|i| i.group == g)
                    .map(|i| i.effect_size)
                    .collect();
                (!row.is_empty()).then_some((g, row))
            })
            .collect()
    }

    pub fn render_effect_size_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Effect sizes (Cohen's d) for self-efficacy improvements [{}]", self.paired_formula);
        let items = Instrument::SelfEfficacy.item_count();
        let _ = write!(out, "{:<20}", "");
        for i in 1..=items {
            let _ = write!(out, "{:>8}", format!("Q{i}"));
        }
        out.push('\n');
        for (group, row) in self.effect_size_rows() {
            let _ = write!(out, "{:<20}", group.display_name());
            for d in row {
                let _ = write!(out, "{:>8}", fmt_opt(d, 3));
            }
            out.push('\n');
        }
        out
    }

    pub fn render_effect_size_csv(&self) -> String {
        let mut out = String::from("group");
        for i in 1..=Instrument::SelfEfficacy.item_count() {
            let _ = write!(out, ",Q{i}");
        }
        out.push('\n');
        for (group, row) in self.effect_size_rows() {
            out.push_str(group.display_name());
            for d in row {
                let _ = write!(out, ",{}", d.map(|v| format!("{v:.3}")).unwrap_or_default());
            }
            out.push('\n');
        }
        out
    }

    fn render_between(out: &mut String, title: &str, rows: &[BetweenItem], formula: &str) {
        if rows.is_empty() {
            return;
        }
        let _ = writeln!(out, "\n{title} [{formula}]");
        let _ = writeln!(
            out,
            "{:<28}{:>18}{:>18}{:>9}{:>8}{:>9}{:>8}",
            "Measure", "Control M (SD)", "Exper. M (SD)", "t", "df", "p", "d"
        );
        for r in rows {
            let _ = writeln!(
                out,
                "{:<28}{:>18}{:>18}{:>9}{:>8}{:>9}{:>8}",
                r.measure,
                mean_sd(&r.control),
                mean_sd(&r.experimental),
                fmt_opt(r.test.map(|t| t.t), 3),
                fmt_opt(r.test.map(|t| t.df), 2),
                fmt_opt(r.test.map(|t| t.p), 5),
                fmt_opt(r.effect_size, 3),
            );
        }
    }

    /// Plain-text report with every table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Study report");
        for (group, n) in &self.participants {
            let _ = writeln!(out, "  {group}: {n} participants");
        }
        let between_label = match self.config.between {
            BetweenTest::Welch => "Welch t-test",
            BetweenTest::Student => "Student t-test (pooled variance)",
        };
        let independent = format!("{between_label}; {}", self.independent_formula);

        if !self.self_efficacy.is_empty() {
            let _ = writeln!(out, "\nSelf-efficacy, pre vs post (paired t-test) [{}]", self.paired_formula);
            let _ = writeln!(
                out,
                "{:<20}{:>5}{:>4}{:>14}{:>14}{:>9}{:>6}{:>9}{:>8}",
                "Group", "Item", "n", "Pre M (SD)", "Post M (SD)", "t", "df", "p", "d"
            );
            for r in &self.self_efficacy {
                let _ = writeln!(
                    out,
                    "{:<20}{:>5}{:>4}{:>14}{:>14}{:>9}{:>6}{:>9}{:>8}",
                    r.group.display_name(),
                    format!("Q{}", r.item),
                    r.pre.n,
                    mean_sd(&r.pre),
                    mean_sd(&r.post),
                    fmt_opt(r.test.map(|t| t.t), 3),
                    fmt_opt(r.test.map(|t| t.df), 0),
                    fmt_opt(r.test.map(|t| t.p), 5),
                    fmt_opt(r.effect_size, 3),
                );
            }
            out.push('\n');
            out.push_str(&self.render_effect_size_table());
        }
        Self::render_between(&mut out, "Pre-task self-efficacy, control vs experimental", &self.pre_task_equivalence, &independent);
        Self::render_between(&mut out, "Cognitive load (NASA-TLX)", &self.cognitive_load, &independent);
        Self::render_between(&mut out, "Satisfaction", &self.satisfaction, &independent);
        Self::render_between(&mut out, "Task time and interaction count", &self.session_metrics, &independent);
        out
    }

    /// Long-form CSV with one row per comparison.
    pub fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "section", "group", "measure", "n_a", "mean_a", "sd_a", "n_b", "mean_b", "sd_b", "t", "df", "p", "d", "formula",
        ];
        w.write_record(header).expect("in-memory CSV");
        let num = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        for r in &self.self_efficacy {
            w.write_record([
                "self-efficacy-pre-post".to_string(),
                format!("{:?}", r.group).to_lowercase(),
                format!("Q{}", r.item),
                r.pre.n.to_string(),
                num(r.pre.mean),
                num(r.pre.sd),
                r.post.n.to_string(),
                num(r.post.mean),
                num(r.post.sd),
                num(r.test.map(|t| t.t)),
                num(r.test.map(|t| t.df)),
                num(r.test.map(|t| t.p)),
                num(r.effect_size),
                self.paired_formula.clone(),
            ])
            .expect("in-memory CSV");
        }
        for (section, rows) in [
            ("pre-task-equivalence", &self.pre_task_equivalence),
            ("cognitive-load", &self.cognitive_load),
            ("satisfaction", &self.satisfaction),
            ("session-metrics", &self.session_metrics),
        ] {
            for r in rows {
                w.write_record([
                    section.to_string(),
                    "control-vs-experimental".to_string(),
                    r.measure.clone(),
                    r.control.n.to_string(),
                    num(r.control.mean),
                    num(r.control.sd),
                    r.experimental.n.to_string(),
                    num(r.experimental.mean),
                    num(r.experimental.sd),
                    num(r.test.map(|t| t.t)),
                    num(r.test.map(|t| t.df)),
                    num(r.test.map(|t| t.p)),
                    num(r.effect_size),
                    self.independent_formula.clone(),
                ])
                .expect("in-memory CSV");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
    }

    /// Grouped-bar data (means with SD whiskers) for external plotting.
    pub fn plot_data(&self) -> PlotData {
        let mut figures = Vec::new();
        for group in Group::ALL {
            let items: Vec<&PrePostItem> = self.self_efficacy.iter().filter(|i| i.group == group).collect();
            if items.is_empty() {
                continue;
            }
            figures.push(Figure {
                id: format!("self-efficacy-{:?}", group).to_lowercase(),
                title: format!("Pre/post self-efficacy, {}", group.display_name().to_lowercase()),
                categories: items.iter().map(|i| format!("Q{}", i.item)).collect(),
                series: vec![
                    Series::from_summaries("Pre", items.iter().map(|i| &i.pre)),
                    Series::from_summaries("Post", items.iter().map(|i| &i.post)),
                ],
                note: self.paired_formula.clone(),
            });
        }
        for (id, title, rows) in [
            ("cognitive-load", "Cognitive load (NASA-TLX)", &self.cognitive_load),
            ("satisfaction", "Satisfaction", &self.satisfaction),
        ] {
            if rows.is_empty() {
                continue;
            }
            figures.push(Figure {
                id: id.into(),
                title: title.into(),
                categories: (1..=rows.len()).map(|i| format!("Q{i}")).collect(),
                series: vec![
                    Series::from_summaries("Control", rows.iter().map(|r| &r.control)),
                    Series::from_summaries("Experimental", rows.iter().map(|r| &r.experimental)),
                ],
                note: self.independent_formula.clone(),
            });
        }
        PlotData { figures }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub figures: Vec<Figure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub id: String,
    pub title: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub means: Vec<Option<f64>>,
    pub sds: Vec<Option<f64>>,
}

impl Series {
    fn from_summaries<'a>(name: &str, summaries: impl Iterator<Item = &'a Summary> + Clone) -> Self {
        Self {
            name: name.into(),
            means: summaries.clone().map(|s| s.mean).collect(),
            sds: summaries.map(|s| s.sd).collect(),
        }
    }
}
