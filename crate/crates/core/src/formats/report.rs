use serde::{Deserialize, Serialize};

use super::check_schema;
use crate::anticipate::{PredictionReport, StepRecord};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "prediction-report/1";

const KIND: &str = "report file";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportFile {
    schema: String,
    user_id: String,
    task_id: String,
    hits: usize,
    accuracy: f64,
    steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord {
    pub user_id: String,
    pub report: PredictionReport,
}

pub fn parse_report(text: &str) -> Result<ReportRecord> {
    let file: ReportFile = serde_json::from_str(text).map_err(|e| {
        Error::format(
            KIND,
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    check_schema(KIND, &file.schema, REPORT_SCHEMA)?;
    let report = PredictionReport::from_steps(&file.task_id, file.steps);
    if report.hits != file.hits {
        return Err(Error::format(
            format!("{KIND}: field `hits`"),
            format!("{} does not match the {} hit steps", file.hits, report.hits),
        ));
    }
    Ok(ReportRecord {
        user_id: file.user_id,
        report,
    })
}

pub fn serialize_report(record: &ReportRecord) -> String {
    let r = &record.report;
    let mut out = serde_json::to_string_pretty(&ReportFile {
        schema: REPORT_SCHEMA.to_string(),
        user_id: record.user_id.clone(),
        task_id: r.task_id.clone(),
        hits: r.hits,
        accuracy: r.accuracy,
        steps: r.steps.clone(),
    })
    .expect("reports serialize to JSON");
    out.push('\n');
    out
}
