//! Exact finite-horizon planning under transferred weights, and next-action
//! anticipation along a user's actual trajectory.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EffortRatings, FeatureTable, WeightVector};
use crate::graph::{enumerate_states, StateGraph};
use crate::task::{ActionId, DemonstrationTrace, State, TaskSpec};

/// Q values closer than this (relative to the best value) count as ties and
/// are resolved towards the lowest action id.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Optimal undiscounted values over a state graph.
#[derive(Debug, Clone)]
pub struct ValueTable {
    graph: Arc<StateGraph>,
    values: Vec<f64>,
    q: Vec<f64>,
}

pub fn value_iteration(
    graph: &Arc<StateGraph>,
    ratings: &EffortRatings,
    w: &WeightVector,
) -> Result<ValueTable> {
    let table = FeatureTable::new(graph.spec(), ratings)?;
    Ok(value_iteration_with(graph, &table, w))
}

/// Same as [`value_iteration`] with the feature table already built.
pub fn value_iteration_with(
    graph: &Arc<StateGraph>,
    table: &FeatureTable,
    w: &WeightVector,
) -> ValueTable {
    let rewards = table.rewards(w);
    let mut values = vec![0.0; graph.num_states()];
    let mut q = vec![0.0; graph.num_edges()];
    // Single backward sweep; the graph is a DAG layered by step.
    for t in (0..graph.num_layers() - 1).rev() {
        for i in graph.layer(t) {
            let mut best = f64::NEG_INFINITY;
            for (slot, e) in graph.edge_range(i).zip(graph.edges(i)) {
                let qa = rewards.of_state(graph.state(e.target)) + values[e.target];
                q[slot] = qa;
                best = best.max(qa);
            }
            values[i] = best;
        }
    }
    ValueTable {
        graph: Arc::clone(graph),
        values,
        q,
    }
}

/// Index of the greedy choice among `qs` plus the number of values tied with
/// the best.
pub(crate) fn argmax_lowest(qs: &[f64]) -> (usize, usize) {
    let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    let mut first = None;
    let mut tied = 0;
    for (k, &qa) in qs.iter().enumerate() {
        if qa >= best - tol {
            first.get_or_insert(k);
            tied += 1;
        }
    }
    (first.expect("non-empty"), tied)
}

impl ValueTable {
    pub fn graph(&self) -> &Arc<StateGraph> {
        &self.graph
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Q values of state `i`, aligned with `graph.edges(i)`.
    pub fn q_values(&self, i: usize) -> &[f64] {
        &self.q[self.graph.edge_range(i)]
    }

    pub fn initial_value(&self) -> f64 {
        self.values[self.graph.initial()]
    }

    fn state_index(&self, s: &State) -> Result<usize> {
        self.graph
            .index_of(s)
            .ok_or_else(|| Error::InvalidState("state is not reachable in this task".into()))
    }

    /// Greedy action at graph state `i` and how many actions tie for best.
    pub fn predict_at(&self, i: usize) -> Result<(ActionId, usize)> {
        let edges = self.graph.edges(i);
        if edges.is_empty() {
            return Err(Error::TerminalState);
        }
        let (k, tied) = argmax_lowest(self.q_values(i));
        Ok((edges[k].action, tied))
    }

    pub fn predict_next(&self, s: &State) -> Result<ActionId> {
        self.predict_at(self.state_index(s)?).map(|(a, _)| a)
    }

    /// Teacher-forced predictions along `trace`.
    pub fn rollout(&self, trace: &DemonstrationTrace) -> Result<PredictionReport> {
        let spec = self.graph.spec();
        spec.validate_trace(trace.actions())?;
        let mut i = self.graph.initial();
        let mut steps = Vec::with_capacity(trace.len());
        for (t, &actual) in trace.actions().iter().enumerate() {
            let (predicted, tied) = self.predict_at(i)?;
            steps.push(StepRecord {
                step: t,
                predicted,
                actual,
                hit: predicted == actual,
                tied,
            });
            i = self
                .graph
                .edges(i)
                .iter()
                .find(|e| e.action == actual)
                .expect("validated trace follows graph edges")
                .target;
        }
        Ok(PredictionReport::from_steps(spec.task_id(), steps))
    }

    /// Greedy plan from the initial state (what the model expects with no
    /// observations at all).
    pub fn greedy_sequence(&self) -> Vec<ActionId> {
        let mut i = self.graph.initial();
        let mut seq = Vec::new();
        while let Ok((a, _)) = self.predict_at(i) {
            seq.push(a);
            i = self
                .graph
                .edges(i)
                .iter()
                .find(|e| e.action == a)
                .unwrap()
                .target;
        }
        seq
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: usize,
    pub predicted: ActionId,
    pub actual: ActionId,
    pub hit: bool,
    /// Actions sharing the best value; above 1 the lowest id was chosen.
    pub tied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionReport {
    pub task_id: String,
    pub steps: Vec<StepRecord>,
    pub hits: usize,
    pub accuracy: f64,
}

impl PredictionReport {
    pub fn from_steps(task_id: &str, steps: Vec<StepRecord>) -> Self {
        let hits = steps.iter().filter(|s| s.hit).count();
        let accuracy = if steps.is_empty() {
            0.0
        } else {
            hits as f64 / steps.len() as f64
        };
        Self {
            task_id: task_id.to_string(),
            steps,
            hits,
            accuracy,
        }
    }

    pub fn hit_sequence(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.hit).collect()
    }
}

/// Plans on `spec` under `w` and predicts each step of `actual_trace`,
/// always advancing with the user's own action.
pub fn rollout_predictions(
    spec: &TaskSpec,
    ratings: &EffortRatings,
    w: &WeightVector,
    actual_trace: &DemonstrationTrace,
) -> Result<PredictionReport> {
    spec.validate_trace(actual_trace.actions())?;
    let graph = Arc::new(enumerate_states(spec)?);
    value_iteration(&graph, ratings, w)?.rollout(actual_trace)
}
