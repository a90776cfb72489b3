//! Evaluation protocol: transferred-preference predictions against two
//! random baselines, aggregated per timestep and compared with paired t-tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anticipate::{value_iteration_with, ValueTable};
use crate::error::{Error, Result};
use crate::features::{EffortRatings, FeatureTable, WeightVector, NUM_FEATURES};
use crate::graph::{enumerate_states, StateGraph};
use crate::irl::{learn_weights_on, Diagnostics, LearnConfig};
use crate::sim::{simulate_with, SimUserProfile};
use crate::stats::{mean_and_se, paired_t_test, TTest};
use crate::task::{DemonstrationTrace, TaskSpec};

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Monte-Carlo trials per user for each baseline.
    pub trials: usize,
    /// Random-weights baseline draws each weight uniformly from this range.
    pub weight_range: (f64, f64),
    pub learn: LearnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: DEFAULT_TRIALS,
            weight_range: (-1.0, 1.0),
            learn: LearnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        let (lo, hi) = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "weight range [{lo}, {hi}] is empty"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Proposed,
    RandomActions,
    RandomWeights,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::Proposed,
        Condition::RandomActions,
        Condition::RandomWeights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Proposed => "proposed",
            Condition::RandomActions => "random-actions",
            Condition::RandomWeights => "random-weights",
        }
    }
}

/// One user's demonstrations and ratings on both tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct UserData {
    pub user_id: String,
    pub canonical_ratings: EffortRatings,
    pub canonical_trace: DemonstrationTrace,
    pub actual_ratings: EffortRatings,
    pub actual_trace: DemonstrationTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserResult {
    pub user_id: String,
    pub learned_weights: WeightVector,
    pub diagnostics: Diagnostics,
    /// Per-step accuracy under each condition.
    pub proposed: Vec<f64>,
    pub random_actions: Vec<f64>,
    pub random_weights: Vec<f64>,
}

impl UserResult {
    pub fn curve(&self, c: Condition) -> &[f64] {
        match c {
            Condition::Proposed => &self.proposed,
            Condition::RandomActions => &self.random_actions,
            Condition::RandomWeights => &self.random_weights,
        }
    }

    pub fn overall(&self, c: Condition) -> f64 {
        let xs = self.curve(c);
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionCurve {
    pub condition: Condition,
    pub per_step_mean: Vec<f64>,
    pub per_step_se: Vec<f64>,
    /// Mean and standard error of per-user overall accuracy.
    pub overall_mean: f64,
    pub overall_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TTestRecord {
    pub left: Condition,
    pub right: Condition,
    /// `None` when the test is degenerate (see `note`).
    pub result: Option<TTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSummary {
    pub n_users: usize,
    pub horizon: usize,
    pub conditions: Vec<ConditionCurve>,
    pub t_tests: Vec<TTestRecord>,
    pub users: Vec<UserResult>,
}

impl EvaluationSummary {
    pub fn curve(&self, c: Condition) -> &ConditionCurve {
        self.conditions
            .iter()
            .find(|x| x.condition == c)
            .expect("every condition is summarized")
    }

    pub fn t_test(&self, left: Condition, right: Condition) -> Option<&TTestRecord> {
        self.t_tests
            .iter()
            .find(|r| r.left == left && r.right == right)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one purpose of one user. Depends on the user id rather than its
/// position so results do not change when the population is reordered.
pub fn user_seed(seed: u64, user_id: &str, stream: u64) -> u64 {
    // FNV-1a over the id
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in user_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(mix64(seed ^ h) ^ stream)
}

const STREAM_CANONICAL_DEMO: u64 = 1;
const STREAM_ACTUAL_DEMO: u64 = 2;
const STREAM_RANDOM_ACTIONS: u64 = 3;
const STREAM_RANDOM_WEIGHTS: u64 = 4;

/// Per-step hit rate of a uniform draw from the teacher-forced feasible set.
pub fn baseline_random_actions(
    spec: &TaskSpec,
    actual_trace: &DemonstrationTrace,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate_trace(actual_trace.actions())?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = spec.initial_state();
    let mut rates = Vec::with_capacity(actual_trace.len());
    for &actual in actual_trace.actions() {
        let feasible = spec.feasible_actions(&s)?;
        let hits = (0..trials)
            .filter(|_| feasible[rng.gen_range(0..feasible.len())] == actual)
            .count();
        rates.push(hits as f64 / trials as f64);
        s = spec.apply_action(&s, actual)?;
    }
    Ok(rates)
}

/// Per-step hit rate of predictions under weights drawn uniformly from
/// `[-1, 1]^6`, a fresh draw per trial.
pub fn baseline_random_weights(
    spec: &TaskSpec,
    ratings: &EffortRatings,
    actual_trace: &DemonstrationTrace,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate_trace(actual_trace.actions())?;
    let graph = Arc::new(enumerate_states(spec)?);
    let table = FeatureTable::new(spec, ratings)?;
    random_weights_on(&graph, &table, actual_trace, trials, (-1.0, 1.0), seed)
}

fn random_weights_on(
    graph: &Arc<StateGraph>,
    table: &FeatureTable,
    actual_trace: &DemonstrationTrace,
    trials: usize,
    (lo, hi): (f64, f64),
    seed: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; actual_trace.len()];
    for _ in 0..trials {
        let mut w = WeightVector::ZERO;
        for i in 0..NUM_FEATURES {
            w[i] = rng.gen_range(lo..=hi);
        }
        let report = value_iteration_with(graph, table, &w).rollout(actual_trace)?;
        for (h, step) in hits.iter_mut().zip(&report.steps) {
            *h += step.hit as usize;
        }
    }
    Ok(hits.iter().map(|&h| h as f64 / trials as f64).collect())
}

/// Everything shared across users: both graphs built once.
struct Tasks {
    canonical: Arc<StateGraph>,
    actual: Arc<StateGraph>,
}

impl Tasks {
    fn new(canonical: &TaskSpec, actual: &TaskSpec) -> Result<Self> {
        Ok(Self {
            canonical: Arc::new(enumerate_states(canonical)?),
            actual: Arc::new(enumerate_states(actual)?),
        })
    }
}

fn evaluate_user(tasks: &Tasks, user: &UserData, cfg: &ExperimentConfig) -> Result<UserResult> {
    let (w, diagnostics) = learn_weights_on(
        &tasks.canonical,
        &user.canonical_ratings,
        std::slice::from_ref(&user.canonical_trace),
        &cfg.learn,
    )?;
    let actual_spec = tasks.actual.spec();
    let table = FeatureTable::new(actual_spec, &user.actual_ratings)?;
    let proposed = value_iteration_with(&tasks.actual, &table, &w)
        .rollout(&user.actual_trace)?
        .steps
        .iter()
        .map(|s| if s.hit { 1.0 } else { 0.0 })
        .collect();
    let random_actions = baseline_random_actions(
        actual_spec,
        &user.actual_trace,
        cfg.trials,
        user_seed(cfg.seed, &user.user_id, STREAM_RANDOM_ACTIONS),
    )?;
    let random_weights = random_weights_on(
        &tasks.actual,
        &table,
        &user.actual_trace,
        cfg.trials,
        cfg.weight_range,
        user_seed(cfg.seed, &user.user_id, STREAM_RANDOM_WEIGHTS),
    )?;
    Ok(UserResult {
        user_id: user.user_id.clone(),
        learned_weights: w,
        diagnostics,
        proposed,
        random_actions,
        random_weights,
    })
}

fn wrap_user(user: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::User {
        user: user.to_string(),
        source: Box::new(e),
    }
}

/// Evaluates recorded demonstrations (simulated or collected).
pub fn evaluate_users(
    users: &[UserData],
    canonical_spec: &TaskSpec,
    actual_spec: &TaskSpec,
    cfg: &ExperimentConfig,
) -> Result<EvaluationSummary> {
    cfg.validate()?;
    if users.is_empty() {
        return Err(Error::InvalidConfig("no users to evaluate".into()));
    }
    let tasks = Tasks::new(canonical_spec, actual_spec)?;
    let results = users
        .par_iter()
        .map(|u| evaluate_user(&tasks, u, cfg).map_err(wrap_user(&u.user_id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(results, actual_spec.total_steps()))
}

/// Simulates both demonstrations for every profile, then evaluates them.
pub fn run_experiment(
    population: &[SimUserProfile],
    canonical_spec: &TaskSpec,
    actual_spec: &TaskSpec,
    cfg: &ExperimentConfig,
) -> Result<EvaluationSummary> {
    let users = simulate_users(population, canonical_spec, actual_spec, cfg.seed)?;
    evaluate_users(&users, canonical_spec, actual_spec, cfg)
}

/// Demonstrations of each profile on both tasks under its own weights.
pub fn simulate_users(
    population: &[SimUserProfile],
    canonical_spec: &TaskSpec,
    actual_spec: &TaskSpec,
    seed: u64,
) -> Result<Vec<UserData>> {
    let tasks = Tasks::new(canonical_spec, actual_spec)?;
    population
        .par_iter()
        .map(|p| simulate_user(&tasks, p, seed).map_err(wrap_user(&p.user_id)))
        .collect()
}

fn simulate_user(tasks: &Tasks, p: &SimUserProfile, seed: u64) -> Result<UserData> {
    let demo = |graph: &Arc<StateGraph>, stream| -> Result<(EffortRatings, DemonstrationTrace)> {
        let ratings = p.ratings_for(graph.spec())?.clone();
        let table = FeatureTable::new(graph.spec(), &ratings)?;
        let vt: ValueTable = value_iteration_with(graph, &table, &p.true_weights);
        let trace = simulate_with(&vt, p.demo_policy, user_seed(seed, &p.user_id, stream))?;
        Ok((ratings, trace))
    };
    let (canonical_ratings, canonical_trace) = demo(&tasks.canonical, STREAM_CANONICAL_DEMO)?;
    let (actual_ratings, actual_trace) = demo(&tasks.actual, STREAM_ACTUAL_DEMO)?;
    Ok(UserData {
        user_id: p.user_id.clone(),
        canonical_ratings,
        canonical_trace,
        actual_ratings,
        actual_trace,
    })
}

/// Per-timestep and per-user aggregation plus paired t-tests of the proposed
/// condition against each baseline.
pub fn summarize(users: Vec<UserResult>, horizon: usize) -> EvaluationSummary {
    let conditions = Condition::ALL
        .iter()
        .map(|&c| {
            let (per_step_mean, per_step_se) = (0..horizon)
                .map(|t| mean_and_se(&users.iter().map(|u| u.curve(c)[t]).collect::<Vec<_>>()))
                .unzip();
            let overall: Vec<f64> = users.iter().map(|u| u.overall(c)).collect();
            let (overall_mean, overall_se) = mean_and_se(&overall);
            ConditionCurve {
                condition: c,
                per_step_mean,
                per_step_se,
                overall_mean,
                overall_se,
            }
        })
        .collect();
    let overall = |c: Condition| users.iter().map(|u| u.overall(c)).collect::<Vec<_>>();
    let t_tests = [Condition::RandomActions, Condition::RandomWeights]
        .iter()
        .map(|&right| {
            let left = Condition::Proposed;
            let (result, note) = match paired_t_test(&overall(left), &overall(right)) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TTestRecord {
                left,
                right,
                result,
                note,
            }
        })
        .collect();
    EvaluationSummary {
        n_users: users.len(),
        horizon,
        conditions,
        t_tests,
        users,
    }
}
