use serde::{Deserialize, Serialize};

use super::{check_schema, to_toml, toml_error};
use crate::error::Result;
use crate::features::WeightVector;
use crate::irl::Diagnostics;

pub const WEIGHTS_SCHEMA: &str = "pref-weights/1";

const KIND: &str = "weights file";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    schema: String,
    user_id: String,
    source_task: String,
    weights: NamedWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedWeights {
    same_part: f64,
    same_tool: f64,
    front_physical: f64,
    front_mental: f64,
    back_physical: f64,
    back_mental: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsRecord {
    pub user_id: String,
    pub source_task: String,
    pub weights: WeightVector,
    pub diagnostics: Option<Diagnostics>,
}

pub fn parse_weights(text: &str) -> Result<WeightsRecord> {
    let file: WeightsFile = toml::from_str(text).map_err(|e| toml_error(KIND, e))?;
    check_schema(KIND, &file.schema, WEIGHTS_SCHEMA)?;
    let w = file.weights;
    Ok(WeightsRecord {
        user_id: file.user_id,
        source_task: file.source_task,
        weights: WeightVector([
            w.same_part,
            w.same_tool,
            w.front_physical,
            w.front_mental,
            w.back_physical,
            w.back_mental,
        ]),
        diagnostics: file.diagnostics,
    })
}

pub fn serialize_weights(record: &WeightsRecord) -> String {
    let [same_part, same_tool, front_physical, front_mental, back_physical, back_mental] =
        record.weights.0;
    to_toml(&WeightsFile {
        schema: WEIGHTS_SCHEMA.to_string(),
        user_id: record.user_id.clone(),
        source_task: record.source_task.clone(),
        weights: NamedWeights {
            same_part,
            same_tool,
            front_physical,
            front_mental,
            back_physical,
            back_mental,
        },
        diagnostics: record.diagnostics.clone(),
    })
}
