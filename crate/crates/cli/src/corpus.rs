//! Loads a directory of recorded ratings and demonstrations.
//!
//! Every `*.toml` file is classified by its `schema` key, so file names do not
//! matter. Files of other schemas (weights, tasks) are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use prefxfer_core::eval::UserData;
use prefxfer_core::formats::{
    parse_ratings, parse_trace, RatingsRecord, TraceRecord, RATINGS_SCHEMA, TRACE_SCHEMA,
};
use prefxfer_core::TaskSpec;

use crate::commands::{read, CliError};

#[derive(Default)]
struct Pieces {
    ratings: BTreeMap<String, RatingsRecord>,
    traces: BTreeMap<String, TraceRecord>,
}

/// Users sorted by id.
pub fn load(
    dir: &Path,
    canonical: &TaskSpec,
    actual: &TaskSpec,
) -> Result<Vec<UserData>, CliError> {
    let io = |source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "toml") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut users: BTreeMap<String, Pieces> = BTreeMap::new();
    for path in &paths {
        let text = read(path)?;
        let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| bad(e.to_string()))?;
        let schema = table.get("schema").and_then(|s| s.as_str()).unwrap_or("");
        let (user, task, slot) = if schema == RATINGS_SCHEMA {
            let r = parse_ratings(&text).map_err(|e| bad(e.to_string()))?;
            (r.user_id.clone(), r.task_id.clone(), Slot::Ratings(r))
        } else if schema == TRACE_SCHEMA {
            let t = parse_trace(&text).map_err(|e| bad(e.to_string()))?;
            (t.user_id.clone(), t.task_id.clone(), Slot::Trace(t))
        } else {
            continue;
        };
        if task != canonical.task_id() && task != actual.task_id() {
            return Err(bad(format!(
                "task `{task}` is neither the canonical nor the actual task"
            )));
        }
        let pieces = users.entry(user.clone()).or_default();
        let dup = match slot {
            Slot::Ratings(r) => pieces.ratings.insert(task.clone(), r).is_some(),
            Slot::Trace(t) => pieces.traces.insert(task.clone(), t).is_some(),
        };
        if dup {
            return Err(bad(format!(
                "second {schema} file for user `{user}` on task `{task}`"
            )));
        }
    }
    if users.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no ratings or trace files found",
            dir.display()
        )));
    }

    users
        .into_iter()
        .map(|(user, mut p)| {
            let mut take = |spec: &TaskSpec| {
                let task = spec.task_id();
                let missing = |what: &str| {
                    CliError::Input(format!("user `{user}` has no {what} for task `{task}`"))
                };
                let context = |e: prefxfer_core::Error| {
                    CliError::Input(format!("user `{user}`, task `{task}`: {e}"))
                };
                let ratings = p.ratings.remove(task).ok_or_else(|| missing("ratings"))?;
                let trace = p.traces.remove(task).ok_or_else(|| missing("trace"))?;
                Ok::<_, CliError>((
                    ratings.to_ratings(spec).map_err(context)?,
                    trace.to_trace(spec).map_err(context)?,
                ))
            };
            let (canonical_ratings, canonical_trace) = take(canonical)?;
            let (actual_ratings, actual_trace) = take(actual)?;
            Ok(UserData {
                user_id: user.clone(),
                canonical_ratings,
                canonical_trace,
                actual_ratings,
                actual_trace,
            })
        })
        .collect()
}

enum Slot {
    Ratings(RatingsRecord),
    Trace(TraceRecord),
}
