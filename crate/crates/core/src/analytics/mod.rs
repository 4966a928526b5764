//! Analysis of exported session metrics and survey responses.

pub mod report;
pub mod stats;
pub mod survey;
pub mod synthetic;

pub use report::{build_report, build_report_from_csv, AnalysisConfig, StatsReport};
pub use stats::{
    cohens_d_independent, cohens_d_paired, independent_t_test, paired_t_test, StatsError, TTest,
};
pub use survey::{Group, Instrument, MetricsRecord, Phase, SchemaError, SurveyResponse};
