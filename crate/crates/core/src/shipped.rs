//! The two study tasks and their nominal effort ratings, embedded at build time.

use crate::features::EffortRatings;
use crate::formats::{parse_ratings, parse_task};
use crate::task::TaskSpec;

pub const CANONICAL_TASK: &str = include_str!("../data/canonical_task.toml");
pub const ACTUAL_TASK: &str = include_str!("../data/actual_task.toml");
pub const CANONICAL_RATINGS: &str = include_str!("../data/canonical_ratings.toml");
pub const ACTUAL_RATINGS: &str = include_str!("../data/actual_ratings.toml");

pub fn canonical_task() -> TaskSpec {
    parse_task(CANONICAL_TASK).expect("shipped canonical task parses")
}

pub fn actual_task() -> TaskSpec {
    parse_task(ACTUAL_TASK).expect("shipped actual task parses")
}

pub fn canonical_ratings() -> EffortRatings {
    parse_ratings(CANONICAL_RATINGS)
        .and_then(|r| r.to_ratings(&canonical_task()))
        .expect("shipped canonical ratings parse")
}

pub fn actual_ratings() -> EffortRatings {
    parse_ratings(ACTUAL_RATINGS)
        .and_then(|r| r.to_ratings(&actual_task()))
        .expect("shipped actual ratings parse")
}
