//! Maximum-entropy IRL over a finite-horizon deterministic task.
//!
//! The soft backward pass computes `Q(s, a) = r(s') + V(s')` and
//! `V(s) = logsumexp_a Q(s, a)` from the terminal layer down; the forward
//! pass pushes unit mass from the initial state through the resulting
//! stochastic policy. Weights ascend the demonstration log-likelihood, whose
//! gradient is the gap between demonstrated and expected feature counts and
//! whose negative Hessian is the covariance of the feature counts.
//!
//! A single demonstration usually sits on the boundary of what the features
//! can express, so the likelihood keeps rising as the weights grow along some
//! ray. Plain gradient steps crawl along such rays; the default Newton
//! direction rescales by the (tiny) curvature there and gets to the stopping
//! tolerance in a handful of steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    empirical_feature_counts, reward, EffortRatings, FeatureTable, FeatureVector, WeightVector,
    BACK_MENTAL, BACK_PHYSICAL, FRONT_MENTAL, FRONT_PHYSICAL, NUM_FEATURES,
};
use crate::graph::{enumerate_states, StateGraph};

type Matrix6 = nalgebra::SMatrix<f64, NUM_FEATURES, NUM_FEATURES>;
type Vector6 = nalgebra::SVector<f64, NUM_FEATURES>;
use crate::task::{DemonstrationTrace, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Init {
    Zero,
    /// Each weight uniform on `[-0.5, 0.5]`.
    SeededUniform {
        seed: u64,
    },
}

/// How each step's ascent direction is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// The feature-count gap itself, scaled by the learning rate.
    Gradient,
    /// The gap preconditioned by the pseudo-inverse of the feature-count
    /// covariance (the negative Hessian). Starts from a full step; the
    /// learning rate is not used.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub direction: Direction,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the L-infinity norm of the feature-count gap is at most this.
    pub tolerance: f64,
    pub init: Init,
    /// Reject any step that lowers the demonstration log-likelihood and retry
    /// it at half the rate.
    pub halve_on_overshoot: bool,
    /// Factor applied to the rate after each accepted step (1 keeps it fixed).
    pub step_growth: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            direction: Direction::Newton,
            learning_rate: 0.05,
            max_iters: 2000,
            tolerance: 1e-3,
            init: Init::Zero,
            halve_on_overshoot: true,
            step_growth: 1.1,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive".into(),
            ));
        }
        if !(self.step_growth.is_finite() && self.step_growth >= 1.0) {
            return Err(Error::InvalidConfig(
                "step_growth must be at least 1".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }

    fn initial_weights(&self) -> WeightVector {
        match self.init {
            Init::Zero => WeightVector::ZERO,
            Init::SeededUniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut w = WeightVector::ZERO;
                for i in 0..NUM_FEATURES {
                    w[i] = rng.gen_range(-0.5..=0.5);
                }
                w
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub final_learning_rate: f64,
}

/// Stochastic policy over the graph's edges, with the soft values it came from.
#[derive(Debug, Clone)]
pub struct SoftPolicy {
    probs: Vec<f64>,
    values: Vec<f64>,
}

impl SoftPolicy {
    /// Action probabilities of state `i`, aligned with `graph.edges(i)`.
    pub fn probs<'a>(&'a self, graph: &StateGraph, i: usize) -> &'a [f64] {
        &self.probs[graph.edge_range(i)]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Soft value of the initial state: the log partition function over all
    /// complete action sequences.
    pub fn log_partition(&self) -> f64 {
        self.values[0]
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn soft_backward(
    graph: &StateGraph,
    ratings: &EffortRatings,
    w: &WeightVector,
) -> Result<SoftPolicy> {
    let table = FeatureTable::new(graph.spec(), ratings)?;
    Ok(soft_backward_with(graph, &table, w))
}

fn soft_backward_with(graph: &StateGraph, table: &FeatureTable, w: &WeightVector) -> SoftPolicy {
    let rewards = table.rewards(w);
    let mut values = vec![0.0; graph.num_states()];
    let mut probs = vec![0.0; graph.num_edges()];
    let mut q = Vec::new();
    for t in (0..graph.num_layers() - 1).rev() {
        for i in graph.layer(t) {
            q.clear();
            q.extend(
                graph
                    .edges(i)
                    .iter()
                    .map(|e| rewards.of_state(graph.state(e.target)) + values[e.target]),
            );
            let v = logsumexp(&q);
            values[i] = v;
            for (p, &qa) in probs[graph.edge_range(i)].iter_mut().zip(&q) {
                *p = (qa - v).exp();
            }
        }
    }
    SoftPolicy { probs, values }
}

/// Probability mass of reaching each state under `policy`.
pub fn state_visitation(graph: &StateGraph, policy: &SoftPolicy) -> Vec<f64> {
    let mut mass = vec![0.0; graph.num_states()];
    mass[graph.initial()] = 1.0;
    for t in 0..graph.num_layers() - 1 {
        for i in graph.layer(t) {
            let d = mass[i];
            if d == 0.0 {
                continue;
            }
            for (e, p) in graph.edges(i).iter().zip(policy.probs(graph, i)) {
                mass[e.target] += d * p;
            }
        }
    }
    mass
}

pub fn expected_feature_counts(
    graph: &StateGraph,
    ratings: &EffortRatings,
    policy: &SoftPolicy,
) -> Result<FeatureVector> {
    let table = FeatureTable::new(graph.spec(), ratings)?;
    Ok(expected_counts_with(graph, &table, policy))
}

fn expected_counts_with(
    graph: &StateGraph,
    table: &FeatureTable,
    policy: &SoftPolicy,
) -> FeatureVector {
    let mass = state_visitation(graph, policy);
    let mut counts = FeatureVector::ZERO;
    for t in 1..graph.num_layers() {
        for i in graph.layer(t) {
            if mass[i] != 0.0 {
                counts += *table.of_state(graph.state(i)) * mass[i];
            }
        }
    }
    counts
}

/// Covariance of total feature counts under `policy`.
///
/// Uses `E[F F^T] = sum_s d(s) (phi phi^T + phi G^T + G phi^T)` where `G(s)`
/// is the expected feature total still to come from `s`.
fn feature_covariance(graph: &StateGraph, table: &FeatureTable, policy: &SoftPolicy) -> Matrix6 {
    let mass = state_visitation(graph, policy);
    let mut future = vec![FeatureVector::ZERO; graph.num_states()];
    for t in (0..graph.num_layers() - 1).rev() {
        for i in graph.layer(t) {
            let mut acc = FeatureVector::ZERO;
            for (e, &p) in graph.edges(i).iter().zip(policy.probs(graph, i)) {
                acc += (*table.of_state(graph.state(e.target)) + future[e.target]) * p;
            }
            future[i] = acc;
        }
    }
    let mut second = Matrix6::zeros();
    for t in 1..graph.num_layers() {
        for i in graph.layer(t) {
            let d = mass[i];
            if d == 0.0 {
                continue;
            }
            let phi = Vector6::from(table.of_state(graph.state(i)).0);
            let g = Vector6::from(future[i].0);
            second += (phi * phi.transpose() + phi * g.transpose() + g * phi.transpose()) * d;
        }
    }
    let mean = Vector6::from(future[graph.initial()].0);
    second - mean * mean.transpose()
}

/// `cov^+ grad`, dropping eigen-directions with (numerically) no curvature.
/// Those include front+back effort, whose total is the same for every
/// sequence. Falls back to `grad` if the result is not an ascent direction.
fn newton_direction(cov: Matrix6, grad: &FeatureVector) -> FeatureVector {
    let eig = cov.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let g = Vector6::from(grad.0);
    let mut d = Vector6::zeros();
    for k in 0..NUM_FEATURES {
        let lambda = eig.eigenvalues[k];
        if lambda > EIGEN_FLOOR * top {
            let v = eig.eigenvectors.column(k);
            d += v * (v.dot(&g) / lambda);
        }
    }
    // Eigenvectors are only approximate; keep the step exactly clear of the
    // front+back directions so they stay where they started.
    for (f, b) in [(FRONT_PHYSICAL, BACK_PHYSICAL), (FRONT_MENTAL, BACK_MENTAL)] {
        let shared = 0.5 * (d[f] + d[b]);
        d[f] -= shared;
        d[b] -= shared;
    }
    if d.iter().all(|x| x.is_finite()) && d.dot(&g) > 0.0 {
        FeatureVector(d.into())
    } else {
        *grad
    }
}

/// Relative eigenvalue cutoff for the covariance pseudo-inverse.
const EIGEN_FLOOR: f64 = 1e-12;

/// Mean log-probability of the demonstrations under the soft policy for `w`.
pub fn demo_log_likelihood(
    graph: &StateGraph,
    ratings: &EffortRatings,
    w: &WeightVector,
    traces: &[DemonstrationTrace],
) -> Result<f64> {
    let policy = soft_backward(graph, ratings, w)?;
    let mut total = 0.0;
    for trace in traces {
        graph.spec().validate_trace(trace.actions())?;
        let mut i = graph.initial();
        for &a in trace.actions() {
            let k = graph
                .edges(i)
                .iter()
                .position(|e| e.action == a)
                .expect("validated trace follows graph edges");
            total += policy.probs(graph, i)[k].ln();
            i = graph.edges(i)[k].target;
        }
    }
    Ok(total / traces.len() as f64)
}

/// Learns weights from one demonstration on `spec`.
pub fn learn_weights(
    spec: &TaskSpec,
    ratings: &EffortRatings,
    trace: &DemonstrationTrace,
    cfg: &LearnConfig,
) -> Result<(WeightVector, Diagnostics)> {
    let graph = enumerate_states(spec)?;
    learn_weights_on(&graph, ratings, std::slice::from_ref(trace), cfg)
}

/// Learns weights from one or more demonstrations, matching their mean
/// feature counts.
pub fn learn_weights_on(
    graph: &StateGraph,
    ratings: &EffortRatings,
    traces: &[DemonstrationTrace],
    cfg: &LearnConfig,
) -> Result<(WeightVector, Diagnostics)> {
    cfg.validate()?;
    if traces.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one demonstration is required".into(),
        ));
    }
    let spec = graph.spec();
    let table = FeatureTable::new(spec, ratings)?;
    let mut target = FeatureVector::ZERO;
    for trace in traces {
        target += empirical_feature_counts(spec, ratings, trace)?;
    }
    let target = target * (1.0 / traces.len() as f64);

    // The log-likelihood w.f - log Z(w) is concave with gradient f - E[f],
    // and log Z falls out of the same backward pass.
    // Returns the gradient, the log-likelihood and the step direction.
    let evaluate = |w: &WeightVector| {
        let policy = soft_backward_with(graph, &table, w);
        let grad = target - expected_counts_with(graph, &table, &policy);
        let ll = reward(w, &target) - policy.log_partition();
        let direction = match cfg.direction {
            Direction::Gradient => grad,
            Direction::Newton => {
                newton_direction(feature_covariance(graph, &table, &policy), &grad)
            }
        };
        (grad, ll, direction)
    };

    let mut w = cfg.initial_weights();
    let (mut grad, mut ll, mut direction) = evaluate(&w);
    let mut lr = match cfg.direction {
        Direction::Gradient => cfg.learning_rate,
        Direction::Newton => 1.0,
    };
    let mut iteration = 0;
    loop {
        if !grad.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let norm = grad.max_abs();
        if norm <= cfg.tolerance || iteration == cfg.max_iters {
            return Ok((
                w,
                Diagnostics {
                    iterations: iteration,
                    gradient_norm: norm,
                    converged: norm <= cfg.tolerance,
                    final_learning_rate: lr,
                },
            ));
        }
        let candidate = w + WeightVector::from(direction * lr);
        if !candidate.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let (next_grad, next_ll, next_direction) = evaluate(&candidate);
        iteration += 1;
        // tolerate rounding noise once the likelihood has flattened out
        // written so that a NaN likelihood counts as a decrease
        let improved = next_ll >= ll - 1e-12 * ll.abs().max(1.0);
        if cfg.halve_on_overshoot && !improved {
            lr *= 0.5;
            continue;
        }
        w = candidate;
        grad = next_grad;
        ll = next_ll;
        direction = next_direction;
        lr *= cfg.step_growth;
    }
}
