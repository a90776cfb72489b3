use serde::{Deserialize, Serialize};

use super::{check_schema, to_toml, toml_error};
use crate::error::{Error, Result};
use crate::features::EffortRatings;
use crate::task::{ActionId, TaskSpec};

pub const RATINGS_SCHEMA: &str = "effort-ratings/1";

const KIND: &str = "ratings file";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingsFile {
    schema: String,
    user_id: String,
    task_id: String,
    scale: Scale,
    #[serde(rename = "rating")]
    ratings: Vec<RatingEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Scale {
    min: f64,
    max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingEntry {
    action: ActionId,
    physical: f64,
    mental: f64,
}

/// Raw questionnaire ratings for one user on one task, on a declared scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsRecord {
    pub user_id: String,
    pub task_id: String,
    pub scale_min: f64,
    pub scale_max: f64,
    /// `(action, physical, mental)` in ascending action order.
    pub raw: Vec<(ActionId, f64, f64)>,
}

impl RatingsRecord {
    /// Wraps already-normalized ratings on a `[0, 1]` scale.
    pub fn from_normalized(user_id: &str, task_id: &str, ratings: &EffortRatings) -> Self {
        Self {
            user_id: user_id.to_string(),
            task_id: task_id.to_string(),
            scale_min: 0.0,
            scale_max: 1.0,
            raw: ratings
                .pairs()
                .enumerate()
                .map(|(a, (p, m))| (a, p, m))
                .collect(),
        }
    }

    /// Normalizes against `spec`, requiring every action to be rated exactly once.
    pub fn to_ratings(&self, spec: &TaskSpec) -> Result<EffortRatings> {
        let k = spec.num_actions();
        let mut slots: Vec<Option<(f64, f64)>> = vec![None; k];
        for &(a, p, m) in &self.raw {
            if a >= k {
                return Err(Error::UnknownAction(a));
            }
            if slots[a].replace((p, m)).is_some() {
                return Err(Error::format(
                    format!("{KIND}: rating for action {a}"),
                    "duplicate entry",
                ));
            }
        }
        let missing: Vec<ActionId> = (0..k).filter(|&a| slots[a].is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::MissingRatings(missing));
        }
        let raw: Vec<(f64, f64)> = slots.into_iter().map(Option::unwrap).collect();
        EffortRatings::from_raw(&raw, self.scale_min, self.scale_max)
    }
}

pub fn parse_ratings(text: &str) -> Result<RatingsRecord> {
    let file: RatingsFile = toml::from_str(text).map_err(|e| toml_error(KIND, e))?;
    check_schema(KIND, &file.schema, RATINGS_SCHEMA)?;
    let (min, max) = (file.scale.min, file.scale.max);
    if !(min.is_finite() && max.is_finite() && max > min) {
        return Err(Error::format(
            format!("{KIND}: table `scale`"),
            format!("min {min} must be below max {max}"),
        ));
    }
    let mut raw = Vec::with_capacity(file.ratings.len());
    for (i, r) in file.ratings.into_iter().enumerate() {
        for (field, v) in [("physical", r.physical), ("mental", r.mental)] {
            if !(min..=max).contains(&v) {
                return Err(Error::format(
                    format!("{KIND}: rating[{i}].{field}"),
                    format!("{v} outside [{min}, {max}]"),
                ));
            }
        }
        raw.push((r.action, r.physical, r.mental));
    }
    raw.sort_by_key(|&(a, _, _)| a);
    Ok(RatingsRecord {
        user_id: file.user_id,
        task_id: file.task_id,
        scale_min: min,
        scale_max: max,
        raw,
    })
}

pub fn serialize_ratings(record: &RatingsRecord) -> String {
    let file = RatingsFile {
        schema: RATINGS_SCHEMA.to_string(),
        user_id: record.user_id.clone(),
        task_id: record.task_id.clone(),
        scale: Scale {
            min: record.scale_min,
            max: record.scale_max,
        },
        ratings: record
            .raw
            .iter()
            .map(|&(action, physical, mental)| RatingEntry {
                action,
                physical,
                mental,
            })
            .collect(),
    };
    to_toml(&file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shipped;

    #[test]
    fn out_of_bounds_rating_names_field() {
        let text = shipped::CANONICAL_RATINGS.replacen("physical = 6.0", "physical = 9.0", 1);
        let err = parse_ratings(&text).unwrap_err().to_string();
        assert!(err.contains("rating[3].physical"), "{err}");
    }

    #[test]
    fn missing_actions_are_listed() {
        let rec = parse_ratings(shipped::CANONICAL_RATINGS).unwrap();
        let partial = RatingsRecord {
            raw: rec.raw.iter().filter(|r| r.0 % 2 == 0).copied().collect(),
            ..rec
        };
        assert_eq!(
            partial.to_ratings(&shipped::canonical_task()).unwrap_err(),
            Error::MissingRatings(vec![1, 3, 5])
        );
    }

    #[test]
    fn uniform_ratings_are_legal() {
        let rec = RatingsRecord {
            user_id: "u".into(),
            task_id: "canonical".into(),
            scale_min: 1.0,
            scale_max: 7.0,
            raw: (0..6).map(|a| (a, 4.0, 4.0)).collect(),
        };
        let r = rec.to_ratings(&shipped::canonical_task()).unwrap();
        assert!(r.pairs().all(|p| p == (0.5, 0.5)));
    }
}
