use serde::{Deserialize, Serialize};

use super::{check_schema, to_toml, toml_error};
use crate::error::Result;
use crate::task::{ActionId, DemonstrationTrace, TaskSpec};

pub const TRACE_SCHEMA: &str = "demo-trace/1";

const KIND: &str = "trace file";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFile {
    schema: String,
    user_id: String,
    task_id: String,
    actions: Vec<ActionId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub user_id: String,
    pub task_id: String,
    pub actions: Vec<ActionId>,
}

impl TraceRecord {
    pub fn to_trace(&self, spec: &TaskSpec) -> Result<DemonstrationTrace> {
        DemonstrationTrace::new(spec, self.actions.clone())
    }
}

pub fn parse_trace(text: &str) -> Result<TraceRecord> {
    let file: TraceFile = toml::from_str(text).map_err(|e| toml_error(KIND, e))?;
    check_schema(KIND, &file.schema, TRACE_SCHEMA)?;
    Ok(TraceRecord {
        user_id: file.user_id,
        task_id: file.task_id,
        actions: file.actions,
    })
}

pub fn serialize_trace(record: &TraceRecord) -> String {
    to_toml(&TraceFile {
        schema: TRACE_SCHEMA.to_string(),
        user_id: record.user_id.clone(),
        task_id: record.task_id.clone(),
        actions: record.actions.clone(),
    })
}
