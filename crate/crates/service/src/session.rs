//! One participant's walk through the study protocol.

use std::collections::BTreeMap;
use std::sync::Arc;

use prefxfer_core::anticipate::{value_iteration, StepRecord, ValueTable};
use prefxfer_core::formats::{
    serialize_ratings, serialize_report, serialize_trace, serialize_weights, RatingsRecord,
    ReportRecord, TraceRecord, WeightsRecord,
};
use prefxfer_core::graph::StateGraph;
use prefxfer_core::irl::{learn_weights_on, Diagnostics, LearnConfig};
use prefxfer_core::{
    ActionId, DemonstrationTrace, EffortRatings, PredictionReport, State, TaskSpec, WeightVector,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    RatingCanonical,
    DemoCanonical,
    RatingActual,
    DemoActual,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::RatingCanonical => "rating-canonical",
            Phase::DemoCanonical => "demo-canonical",
            Phase::RatingActual => "rating-actual",
            Phase::DemoActual => "demo-actual",
            Phase::Done => "done",
        }
    }
}

/// A task loaded at service start, with its state graph.
#[derive(Debug)]
pub struct LoadedTask {
    pub spec: TaskSpec,
    pub graph: Arc<StateGraph>,
}

/// A prediction made for one actual-task step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anticipation {
    pub step: usize,
    pub predicted: ActionId,
    pub tied: usize,
    /// Whether the prediction was sent to the client.
    pub shown: bool,
    /// Session event counter when the prediction was made.
    pub predicted_at: u64,
    pub actual: Option<ActionId>,
    pub submitted_at: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionView {
    pub id: ActionId,
    pub label: String,
    pub part: String,
    pub tool: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockedAction {
    pub id: ActionId,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepView {
    pub phase: Phase,
    pub task_id: String,
    pub step: usize,
    pub total_steps: usize,
    pub feasible: Vec<ActionView>,
    /// Actions with repetitions left that precedence currently blocks.
    pub blocked: Vec<BlockedAction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anticipation: Option<ActionId>,
    pub done: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Learned {
    pub weights: WeightVector,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionOutcome {
    pub phase: Phase,
    /// Steps completed in the task the action belonged to.
    pub step: usize,
    /// Whether the anticipation for this step matched (actual task only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learned: Option<Learned>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PredictionReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Export {
    pub session_id: String,
    pub phase: Phase,
    pub partial: bool,
    /// File name to contents, in the CLI's file formats.
    pub files: BTreeMap<String, String>,
}

pub const CANONICAL_RATINGS_FILE: &str = "canonical.ratings.toml";
pub const CANONICAL_TRACE_FILE: &str = "canonical.trace.toml";
pub const ACTUAL_RATINGS_FILE: &str = "actual.ratings.toml";
pub const ACTUAL_TRACE_FILE: &str = "actual.trace.toml";
pub const WEIGHTS_FILE: &str = "weights.toml";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug)]
pub struct Session {
    id: String,
    canonical: Arc<LoadedTask>,
    actual: Arc<LoadedTask>,
    learn: LearnConfig,
    hide_anticipation: bool,
    phase: Phase,
    clock: u64,
    canonical_ratings: Option<(RatingsRecord, EffortRatings)>,
    actual_ratings: Option<(RatingsRecord, EffortRatings)>,
    canonical_trace: Vec<ActionId>,
    actual_trace: Vec<ActionId>,
    state: State,
    learned: Option<Learned>,
    values: Option<ValueTable>,
    /// Graph node of the current actual-task state.
    node: usize,
    log: Vec<Anticipation>,
    report: Option<PredictionReport>,
}

impl Session {
    pub fn new(
        id: String,
        canonical: Arc<LoadedTask>,
        actual: Arc<LoadedTask>,
        learn: LearnConfig,
        hide_anticipation: bool,
    ) -> Self {
        let state = canonical.spec.initial_state();
        Self {
            id,
            canonical,
            actual,
            learn,
            hide_anticipation,
            phase: Phase::RatingCanonical,
            clock: 0,
            canonical_ratings: None,
            actual_ratings: None,
            canonical_trace: Vec::new(),
            actual_trace: Vec::new(),
            state,
            learned: None,
            values: None,
            node: 0,
            log: Vec::new(),
            report: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn anticipation_log(&self) -> &[Anticipation] {
        &self.log
    }

    pub fn learned(&self) -> Option<&Learned> {
        self.learned.as_ref()
    }

    pub fn report(&self) -> Option<&PredictionReport> {
        self.report.as_ref()
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn wrong_phase(&self, wanted: &str) -> ApiError {
        ApiError::WrongPhase(format!(
            "session is in phase {}, operation needs {wanted}",
            self.phase.name()
        ))
    }

    fn active_task(&self) -> Option<&Arc<LoadedTask>> {
        match self.phase {
            Phase::RatingCanonical | Phase::DemoCanonical => Some(&self.canonical),
            Phase::RatingActual | Phase::DemoActual => Some(&self.actual),
            Phase::Done => None,
        }
    }

    /// Stores raw ratings for the task currently being rated.
    pub fn submit_ratings(&mut self, record: RatingsRecord) -> Result<Phase, ApiError> {
        if !matches!(self.phase, Phase::RatingCanonical | Phase::RatingActual) {
            return Err(self.wrong_phase("a rating phase"));
        }
        let task = Arc::clone(self.active_task().expect("rating phases have a task"));
        if record.task_id != task.spec.task_id() {
            return Err(ApiError::WrongPhase(format!(
                "ratings are for task {}, session is rating task {}",
                record.task_id,
                task.spec.task_id()
            )));
        }
        let normalized = record.to_ratings(&task.spec)?;
        if self.phase == Phase::RatingCanonical {
            self.canonical_ratings = Some((record, normalized));
            self.phase = Phase::DemoCanonical;
        } else {
            let values = value_iteration(
                &self.actual.graph,
                &normalized,
                &self
                    .learned
                    .as_ref()
                    .expect("weights exist after the canonical demo")
                    .weights,
            )?;
            self.values = Some(values);
            self.actual_ratings = Some((record, normalized));
            self.state = self.actual.spec.initial_state();
            self.node = self.actual.graph.initial();
            self.phase = Phase::DemoActual;
        }
        Ok(self.phase)
    }

    /// Logs (once per step) and returns the prediction for the current
    /// actual-task state.
    fn anticipate(&mut self, shown: bool) -> Result<&mut Anticipation, ApiError> {
        let step = self.actual_trace.len();
        let exists = self.log.last().is_some_and(|a| a.step == step);
        if !exists {
            let (predicted, tied) = self
                .values
                .as_ref()
                .expect("value table exists in the actual demo")
                .predict_at(self.node)?;
            let predicted_at = self.tick();
            self.log.push(Anticipation {
                step,
                predicted,
                tied,
                shown,
                predicted_at,
                actual: None,
                submitted_at: None,
            });
        }
        let entry = self.log.last_mut().expect("just ensured");
        entry.shown |= shown;
        Ok(entry)
    }

    pub fn step(&mut self) -> Result<StepView, ApiError> {
        let task = match self.phase {
            Phase::DemoCanonical | Phase::DemoActual => Arc::clone(self.active_task().unwrap()),
            Phase::Done => {
                return Ok(StepView {
                    phase: Phase::Done,
                    task_id: self.actual.spec.task_id().to_string(),
                    step: self.actual_trace.len(),
                    total_steps: self.actual.spec.total_steps(),
                    feasible: Vec::new(),
                    blocked: Vec::new(),
                    anticipation: None,
                    done: true,
                })
            }
            _ => return Err(self.wrong_phase("a demo phase")),
        };
        let spec = &task.spec;
        let feasible = spec.feasible_actions(&self.state)?;
        let blocked = (0..spec.num_actions())
            .filter(|a| self.state.remaining[*a] > 0 && !feasible.contains(a))
            .map(|a| BlockedAction {
                id: a,
                reason: spec
                    .apply_action(&self.state, a)
                    .err()
                    .map(|e| e.to_string())
                    .unwrap_or_default(),
            })
            .collect();
        let anticipation = if self.phase == Phase::DemoActual {
            let show = !self.hide_anticipation;
            let predicted = self.anticipate(show)?.predicted;
            show.then_some(predicted)
        } else {
            None
        };
        Ok(StepView {
            phase: self.phase,
            task_id: spec.task_id().to_string(),
            step: self.state.step,
            total_steps: spec.total_steps(),
            feasible: feasible
                .iter()
                .map(|&a| {
                    let t = spec.action(a).expect("feasible ids exist");
                    ActionView {
                        id: a,
                        label: t.label.clone(),
                        part: spec.parts()[t.part_id].clone(),
                        tool: spec.tools()[t.tool_id].clone(),
                    }
                })
                .collect(),
            blocked,
            anticipation,
            done: false,
        })
    }

    pub fn submit_action(&mut self, action: ActionId) -> Result<ActionOutcome, ApiError> {
        match self.phase {
            Phase::DemoCanonical => {
                let next = self.canonical.spec.apply_action(&self.state, action)?;
                self.state = next;
                self.canonical_trace.push(action);
                let mut learned = None;
                if self.state.is_terminal() {
                    let trace = DemonstrationTrace::new(
                        &self.canonical.spec,
                        self.canonical_trace.clone(),
                    )?;
                    let ratings = &self.canonical_ratings.as_ref().expect("rated").1;
                    let (weights, diagnostics) = learn_weights_on(
                        &self.canonical.graph,
                        ratings,
                        std::slice::from_ref(&trace),
                        &self.learn,
                    )?;
                    let l = Learned {
                        weights,
                        diagnostics,
                    };
                    self.learned = Some(l.clone());
                    learned = Some(l);
                    self.phase = Phase::RatingActual;
                }
                Ok(ActionOutcome {
                    phase: self.phase,
                    step: self.canonical_trace.len(),
                    hit: None,
                    learned,
                    report: None,
                })
            }
            Phase::DemoActual => {
                // validate before touching the log so a rejected action
                // leaves the session unchanged
                let next = self.actual.spec.apply_action(&self.state, action)?;
                // a prediction the client never fetched is still made first
                self.anticipate(false)?;
                let submitted_at = self.tick();
                let entry = self.log.last_mut().expect("anticipated above");
                entry.actual = Some(action);
                entry.submitted_at = Some(submitted_at);
                let hit = entry.predicted == action;
                let graph = &self.actual.graph;
                self.node = graph
                    .edges(self.node)
                    .iter()
                    .find(|e| e.action == action)
                    .expect("feasible action has an edge")
                    .target;
                self.state = next;
                self.actual_trace.push(action);
                let mut report = None;
                if self.state.is_terminal() {
                    let steps = self
                        .log
                        .iter()
                        .map(|a| {
                            let actual = a.actual.expect("every step was submitted");
                            StepRecord {
                                step: a.step,
                                predicted: a.predicted,
                                actual,
                                hit: a.predicted == actual,
                                tied: a.tied,
                            }
                        })
                        .collect();
                    let r = PredictionReport::from_steps(self.actual.spec.task_id(), steps);
                    self.report = Some(r.clone());
                    report = Some(r);
                    self.phase = Phase::Done;
                }
                Ok(ActionOutcome {
                    phase: self.phase,
                    step: self.actual_trace.len(),
                    hit: Some(hit),
                    learned: None,
                    report,
                })
            }
            _ => Err(self.wrong_phase("a demo phase")),
        }
    }

    pub fn export(&self) -> Export {
        let mut files = BTreeMap::new();
        let user = &self.id;
        if let Some((r, _)) = &self.canonical_ratings {
            files.insert(CANONICAL_RATINGS_FILE.into(), serialize_ratings(r));
        }
        if let Some((r, _)) = &self.actual_ratings {
            files.insert(ACTUAL_RATINGS_FILE.into(), serialize_ratings(r));
        }
        for (name, task, trace) in [
            (CANONICAL_TRACE_FILE, &self.canonical, &self.canonical_trace),
            (ACTUAL_TRACE_FILE, &self.actual, &self.actual_trace),
        ] {
            if !trace.is_empty() {
                files.insert(
                    name.into(),
                    serialize_trace(&TraceRecord {
                        user_id: user.clone(),
                        task_id: task.spec.task_id().to_string(),
                        actions: trace.clone(),
                    }),
                );
            }
        }
        if let Some(l) = &self.learned {
            files.insert(
                WEIGHTS_FILE.into(),
                serialize_weights(&WeightsRecord {
                    user_id: user.clone(),
                    source_task: self.canonical.spec.task_id().to_string(),
                    weights: l.weights,
                    diagnostics: Some(l.diagnostics.clone()),
                }),
            );
        }
        if let Some(r) = &self.report {
            files.insert(
                REPORT_FILE.into(),
                serialize_report(&ReportRecord {
                    user_id: user.clone(),
                    report: r.clone(),
                }),
            );
        }
        Export {
            session_id: self.id.clone(),
            phase: self.phase,
            partial: self.phase != Phase::Done,
            files,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use prefxfer_core::graph::enumerate_states;
    use prefxfer_core::shipped;

    fn loaded(spec: TaskSpec) -> Arc<LoadedTask> {
        let graph = Arc::new(enumerate_states(&spec).unwrap());
        Arc::new(LoadedTask { spec, graph })
    }

    fn session() -> Session {
        Session::new(
            "s".into(),
            loaded(shipped::canonical_task()),
            loaded(shipped::actual_task()),
            LearnConfig::default(),
            false,
        )
    }

    fn nominal(task: &str) -> RatingsRecord {
        let text = match task {
            "canonical" => shipped::CANONICAL_RATINGS,
            _ => shipped::ACTUAL_RATINGS,
        };
        prefxfer_core::formats::parse_ratings(text).unwrap()
    }

    #[test]
    fn phases_advance_in_order() {
        let mut s = session();
        assert!(matches!(s.step(), Err(ApiError::WrongPhase(_))));
        assert_eq!(
            s.submit_ratings(nominal("canonical")).unwrap(),
            Phase::DemoCanonical
        );
        assert!(s.step().unwrap().anticipation.is_none());
        for a in [2, 1, 4, 0, 5] {
            assert!(s.submit_action(a).unwrap().learned.is_none());
        }
        assert!(s.learned().is_none());
        let out = s.submit_action(3).unwrap();
        assert!(out.learned.is_some());
        assert_eq!(s.phase(), Phase::RatingActual);
        assert!(matches!(s.submit_action(0), Err(ApiError::WrongPhase(_))));
        assert_eq!(
            s.submit_ratings(nominal("actual")).unwrap(),
            Phase::DemoActual
        );
        let first = s.step().unwrap();
        assert_eq!(
            first.feasible.iter().map(|a| a.id).collect::<Vec<_>>(),
            vec![0, 2, 6]
        );
        assert!(first.anticipation.is_some());
    }

    #[test]
    fn wrong_task_ratings_rejected() {
        let mut s = session();
        assert!(matches!(
            s.submit_ratings(nominal("actual")),
            Err(ApiError::WrongPhase(_))
        ));
        assert_eq!(s.phase(), Phase::RatingCanonical);
    }

    #[test]
    fn rejected_action_leaves_state_alone() {
        let mut s = session();
        s.submit_ratings(nominal("canonical")).unwrap();
        let before = s.export();
        assert!(matches!(s.submit_action(3), Err(ApiError::Core(_))));
        assert!(matches!(s.submit_action(17), Err(ApiError::Core(_))));
        assert_eq!(s.export().files, before.files);
        assert_eq!(s.step().unwrap().step, 0);
    }

    #[test]
    fn unfetched_predictions_are_logged_hidden() {
        let mut s = session();
        s.submit_ratings(nominal("canonical")).unwrap();
        for a in [2, 1, 4, 0, 5, 3] {
            s.submit_action(a).unwrap();
        }
        s.submit_ratings(nominal("actual")).unwrap();
        s.step().unwrap();
        s.submit_action(6).unwrap();
        s.submit_action(6).unwrap();
        let log = s.anticipation_log();
        assert_eq!(log.len(), 2);
        assert!(log[0].shown && !log[1].shown);
        for a in log {
            assert!(a.predicted_at < a.submitted_at.unwrap());
        }
    }
}
