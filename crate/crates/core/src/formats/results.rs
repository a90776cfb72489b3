use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::check_schema;
use crate::error::{Error, Result};
use crate::eval::{EvaluationSummary, ExperimentConfig};
use crate::sim::{ArchetypeMix, DemoPolicy};

pub const RESULTS_SCHEMA: &str = "eval-results/1";

const KIND: &str = "results file";

/// Where the evaluated users came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum UserSource {
    Simulated {
        n_users: usize,
        mix: ArchetypeMix,
        population_seed: u64,
        demo_policy: DemoPolicy,
    },
    /// Recorded ratings and traces; ids in evaluation order.
    Corpus { user_ids: Vec<String> },
}

/// Everything needed to rerun an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub canonical_task: String,
    pub actual_task: String,
    pub users: UserSource,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub schema: String,
    pub config: RunConfig,
    pub summary: EvaluationSummary,
}

impl ResultsFile {
    pub fn new(config: RunConfig, summary: EvaluationSummary) -> Self {
        Self {
            schema: RESULTS_SCHEMA.to_string(),
            config,
            summary,
        }
    }
}

pub fn parse_results(text: &str) -> Result<ResultsFile> {
    let file: ResultsFile = serde_json::from_str(text).map_err(|e| {
        Error::format(
            KIND,
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    check_schema(KIND, &file.schema, RESULTS_SCHEMA)?;
    Ok(file)
}

/// Pretty-printed JSON with a trailing newline.
pub fn serialize_results(file: &ResultsFile) -> String {
    let mut out = serde_json::to_string_pretty(file).expect("results serialize to JSON");
    out.push('\n');
    out
}

/// `condition,timestep,mean,se`, one row per condition and step.
pub fn results_csv(summary: &EvaluationSummary) -> String {
    let mut out = String::from("condition,timestep,mean,se\n");
    for curve in &summary.conditions {
        for (t, (m, se)) in curve
            .per_step_mean
            .iter()
            .zip(&curve.per_step_se)
            .enumerate()
        {
            writeln!(out, "{},{t},{m},{se}", curve.condition.name()).unwrap();
        }
    }
    out
}
