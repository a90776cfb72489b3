//! Preference transfer for assembly tasks.
//!
//! A user's sequencing preference is modelled as a linear reward over six
//! task-agnostic features (same part, same tool, and front/back-loading of
//! physical and mental effort). Weights are learned by maximum-entropy IRL
//! from a single demonstration in a short canonical task, then reused to plan
//! in a longer actual task and anticipate the user's next action there.

pub mod anticipate;
pub mod error;
pub mod eval;
pub mod features;
pub mod formats;
pub mod graph;
pub mod irl;
pub mod shipped;
pub mod sim;
pub mod stats;
pub mod task;

pub use anticipate::{
    rollout_predictions, value_iteration, PredictionReport, StepRecord, ValueTable,
};
pub use error::{Error, Result};
pub use features::{
    empirical_feature_counts, featurize, reward, EffortRatings, FeatureVector, WeightVector,
};
pub use graph::{enumerate_states, StateGraph};
pub use irl::{learn_weights, Diagnostics, Direction, Init, LearnConfig, SoftPolicy};
pub use task::{ActionId, ActionType, DemonstrationTrace, PrecedenceRule, State, TaskSpec};
