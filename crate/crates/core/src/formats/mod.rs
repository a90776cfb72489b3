//! On-disk formats.
//!
//! Tasks, ratings, traces and weights are line-oriented TOML documents with a
//! `schema` version key; evaluation results and prediction reports are JSON.
//! Parsing is strict: unknown keys are rejected and errors carry the line or
//! field that failed.

mod ratings;
mod report;
mod results;
mod task;
mod trace;
mod weights;

pub use ratings::{parse_ratings, serialize_ratings, RatingsRecord, RATINGS_SCHEMA};
pub use report::{parse_report, serialize_report, ReportRecord, REPORT_SCHEMA};
pub use results::{
    parse_results, results_csv, serialize_results, ResultsFile, RunConfig, UserSource,
    RESULTS_SCHEMA,
};
pub use task::{parse_task, serialize_task, TASK_SCHEMA};
pub use trace::{parse_trace, serialize_trace, TraceRecord, TRACE_SCHEMA};
pub use weights::{parse_weights, serialize_weights, WeightsRecord, WEIGHTS_SCHEMA};

use crate::error::Error;

fn toml_error(kind: &str, e: toml::de::Error) -> Error {
    Error::format(kind, e.to_string().trim_end().to_string())
}

fn check_schema(kind: &str, found: &str, expected: &str) -> Result<(), Error> {
    if found != expected {
        return Err(Error::format(
            format!("{kind}: field `schema`"),
            format!("expected \"{expected}\", found \"{found}\""),
        ));
    }
    Ok(())
}

fn to_toml<T: serde::Serialize>(value: &T) -> String {
    toml::to_string(value).expect("format records serialize to TOML")
}
