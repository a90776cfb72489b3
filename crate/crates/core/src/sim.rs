//! Simulated demonstrators with known ground-truth preferences.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anticipate::{value_iteration, ValueTable};
use crate::error::{Error, Result};
use crate::features::{
    EffortRatings, WeightVector, BACK_PHYSICAL, FRONT_MENTAL, FRONT_PHYSICAL, SAME_PART, SAME_TOOL,
};
use crate::graph::{enumerate_states, StateGraph};
use crate::shipped;
use crate::task::{DemonstrationTrace, TaskSpec};

/// Magnitude of an archetype's dominant weights.
pub const DOMINANT_WEIGHT: f64 = 1.0;
/// Magnitude of every other weight.
pub const MINOR_WEIGHT: f64 = 0.1;
/// Half-width of the uniform jitter added to nominal ratings.
pub const RATING_JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    PartChainer,
    ToolChainer,
    PhysicalBackloader,
    PhysicalFrontloader,
    MentalFrontloader,
    /// Same-part chaining with back-loaded physical effort.
    Mixed,
}

impl Archetype {
    pub const ALL: [Archetype; 6] = [
        Archetype::PartChainer,
        Archetype::ToolChainer,
        Archetype::PhysicalBackloader,
        Archetype::PhysicalFrontloader,
        Archetype::MentalFrontloader,
        Archetype::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::PartChainer => "part-chainer",
            Archetype::ToolChainer => "tool-chainer",
            Archetype::PhysicalBackloader => "physical-backloader",
            Archetype::PhysicalFrontloader => "physical-frontloader",
            Archetype::MentalFrontloader => "mental-frontloader",
            Archetype::Mixed => "mixed",
        }
    }

    /// Ground-truth weights: 1.0 on the dominant features, 0.1 in magnitude
    /// elsewhere. The minor weights share one sign pattern (mild preference
    /// for switching part and tool, physical effort early, mental effort
    /// late) so that secondary preferences break ties consistently instead of
    /// cancelling out.
    pub fn weights(self) -> WeightVector {
        let m = MINOR_WEIGHT;
        let mut w = WeightVector([-m, -m, m, -m, -m, m]);
        let dominant: &[usize] = match self {
            Archetype::PartChainer => &[SAME_PART],
            Archetype::ToolChainer => &[SAME_TOOL],
            Archetype::PhysicalBackloader => &[BACK_PHYSICAL],
            Archetype::PhysicalFrontloader => &[FRONT_PHYSICAL],
            Archetype::MentalFrontloader => &[FRONT_MENTAL],
            Archetype::Mixed => &[SAME_PART, BACK_PHYSICAL],
        };
        for &i in dominant {
            w[i] = DOMINANT_WEIGHT;
        }
        w
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown archetype `{s}`")))
    }
}

/// Mixture weights over archetypes, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeMix(Vec<(Archetype, f64)>);

impl ArchetypeMix {
    pub fn new(entries: Vec<(Archetype, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("archetype mix is empty".into()));
        }
        if entries.iter().any(|&(_, p)| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::InvalidConfig(
                "mix weights must be non-negative".into(),
            ));
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "mix weights sum to {total}, expected 1"
            )));
        }
        Ok(Self(entries))
    }

    pub fn only(archetype: Archetype) -> Self {
        Self(vec![(archetype, 1.0)])
    }

    pub fn entries(&self) -> &[(Archetype, f64)] {
        &self.0
    }
}

impl Default for ArchetypeMix {
    fn default() -> Self {
        let p = 1.0 / Archetype::ALL.len() as f64;
        Self(Archetype::ALL.iter().map(|&a| (a, p)).collect())
    }
}

impl fmt::Display for ArchetypeMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, p)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}={p}")?;
        }
        Ok(())
    }
}

impl FromStr for ArchetypeMix {
    type Err = Error;

    /// `part-chainer=0.5,mixed=0.5`
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|item| {
                let (name, p) = item.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("mix entry `{item}` is not name=weight"))
                })?;
                let p: f64 = p.trim().parse().map_err(|_| {
                    Error::InvalidConfig(format!("mix weight `{p}` is not a number"))
                })?;
                Ok((name.trim().parse()?, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DemoPolicy {
    /// Always the optimal action (lowest id on ties).
    Greedy,
    /// Samples actions with probability proportional to `exp(beta * Q)`.
    Softmax { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimUserProfile {
    pub user_id: String,
    pub archetype: Archetype,
    pub true_weights: WeightVector,
    pub canonical_task: String,
    pub canonical_ratings: EffortRatings,
    pub actual_task: String,
    pub actual_ratings: EffortRatings,
    pub demo_policy: DemoPolicy,
}

impl SimUserProfile {
    pub fn ratings_for(&self, spec: &TaskSpec) -> Result<&EffortRatings> {
        let ratings = if spec.task_id() == self.canonical_task {
            &self.canonical_ratings
        } else if spec.task_id() == self.actual_task {
            &self.actual_ratings
        } else {
            return Err(Error::InvalidConfig(format!(
                "profile {} has no ratings for task {}",
                self.user_id,
                spec.task_id()
            )));
        };
        ratings.check_covers(spec)?;
        Ok(ratings)
    }
}

/// Demonstration for `profile` on `spec`.
pub fn simulate_demo(
    spec: &TaskSpec,
    profile: &SimUserProfile,
    seed: u64,
) -> Result<DemonstrationTrace> {
    let graph = Arc::new(enumerate_states(spec)?);
    let vt = value_iteration(&graph, profile.ratings_for(spec)?, &profile.true_weights)?;
    simulate_with(&vt, profile.demo_policy, seed)
}

/// Rolls a policy out over precomputed optimal values.
pub fn simulate_with(vt: &ValueTable, policy: DemoPolicy, seed: u64) -> Result<DemonstrationTrace> {
    let graph: &StateGraph = vt.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i = graph.initial();
    let mut actions = Vec::with_capacity(graph.spec().total_steps());
    while !graph.edges(i).is_empty() {
        let k = match policy {
            DemoPolicy::Greedy => {
                let (a, _) = vt.predict_at(i)?;
                graph.edges(i).iter().position(|e| e.action == a).unwrap()
            }
            DemoPolicy::Softmax { beta } => {
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(Error::InvalidConfig("softmax beta must be positive".into()));
                }
                let qs = vt.q_values(i);
                let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = qs.iter().map(|q| (beta * (q - best)).exp()).collect();
                WeightedIndex::new(&weights)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?
                    .sample(&mut rng)
            }
        };
        let edge = graph.edges(i)[k];
        actions.push(edge.action);
        i = edge.target;
    }
    DemonstrationTrace::new(graph.spec(), actions)
}

fn jitter(rng: &mut ChaCha8Rng, nominal: &EffortRatings) -> EffortRatings {
    let mut j = |v: f64| (v + rng.gen_range(-RATING_JITTER..=RATING_JITTER)).clamp(0.0, 1.0);
    let pairs = nominal.pairs().map(|(p, m)| (j(p), j(m))).collect();
    EffortRatings::new(pairs).expect("clamped ratings are in range")
}

/// `n` greedy profiles over the shipped tasks, archetypes drawn from `mix`.
pub fn sample_population(n: usize, mix: &ArchetypeMix, seed: u64) -> Vec<SimUserProfile> {
    let canonical = shipped::canonical_ratings();
    let actual = shipped::actual_ratings();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index =
        WeightedIndex::new(mix.entries().iter().map(|e| e.1)).expect("validated mix weights");
    (0..n)
        .map(|u| {
            let archetype = mix.entries()[index.sample(&mut rng)].0;
            SimUserProfile {
                user_id: format!("sim-{u:03}"),
                archetype,
                true_weights: archetype.weights(),
                canonical_task: "canonical".into(),
                canonical_ratings: jitter(&mut rng, &canonical),
                actual_task: "actual".into(),
                actual_ratings: jitter(&mut rng, &actual),
                demo_policy: DemoPolicy::Greedy,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{BACK_MENTAL, NUM_FEATURES};

    #[test]
    fn empty_population() {
        assert!(sample_population(0, &ArchetypeMix::default(), 1).is_empty());
    }

    #[test]
    fn pure_backloader_mix() {
        let pop = sample_population(25, &ArchetypeMix::only(Archetype::PhysicalBackloader), 9);
        for p in &pop {
            let w = p.true_weights;
            for i in [FRONT_PHYSICAL, FRONT_MENTAL, BACK_MENTAL] {
                assert!(w[BACK_PHYSICAL] > w[i]);
            }
        }
    }

    #[test]
    fn study_sized_population_is_reproducible() {
        let a = sample_population(19, &ArchetypeMix::default(), 42);
        let b = sample_population(19, &ArchetypeMix::default(), 42);
        assert_eq!(a.len(), 19);
        assert_eq!(a, b);
        assert_ne!(a, sample_population(19, &ArchetypeMix::default(), 43));
    }

    #[test]
    fn weights_have_fixed_magnitudes() {
        for a in Archetype::ALL {
            let w = a.weights();
            for i in 0..NUM_FEATURES {
                let m = w[i].abs();
                assert!(m == DOMINANT_WEIGHT || m == MINOR_WEIGHT, "{a}: {w}");
            }
        }
    }

    #[test]
    fn jitter_stays_near_nominal() {
        let nominal = shipped::actual_ratings();
        for p in sample_population(30, &ArchetypeMix::default(), 5) {
            for ((a, b), (c, d)) in p.actual_ratings.pairs().zip(nominal.pairs()) {
                assert!((a - c).abs() <= RATING_JITTER + 1e-12);
                assert!((b - d).abs() <= RATING_JITTER + 1e-12);
                assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            }
        }
    }

    #[test]
    fn mix_parsing() {
        let mix: ArchetypeMix = "part-chainer=0.25,mixed=0.75".parse().unwrap();
        assert_eq!(
            mix.entries(),
            &[(Archetype::PartChainer, 0.25), (Archetype::Mixed, 0.75)]
        );
        assert_eq!(mix.to_string().parse::<ArchetypeMix>().unwrap(), mix);
        assert!("part-chainer=0.3".parse::<ArchetypeMix>().is_err());
        assert!("sleepy=1".parse::<ArchetypeMix>().is_err());
    }

    #[test]
    fn backloader_leaves_heavy_actions_for_last() {
        let spec = shipped::canonical_task();
        let mut profile =
            sample_population(1, &ArchetypeMix::only(Archetype::PhysicalBackloader), 3).remove(0);
        profile.canonical_ratings = shipped::canonical_ratings();
        let trace = simulate_demo(&spec, &profile, 0).unwrap();
        let r = &profile.canonical_ratings;
        // the two high-physical actions (3: long bolt, 5: long wire) close the task
        let tail: Vec<_> = trace.actions()[4..].to_vec();
        for a in [3, 5] {
            assert!(tail.contains(&a), "{:?}", trace.actions());
        }
        assert!(r.physical(3) > r.physical(4));
    }

    #[test]
    fn softmax_with_large_beta_is_greedy() {
        for spec in [shipped::canonical_task(), shipped::actual_task()] {
            for mut p in sample_population(6, &ArchetypeMix::default(), 11) {
                let greedy = simulate_demo(&spec, &p, 0).unwrap();
                p.demo_policy = DemoPolicy::Softmax { beta: 1000.0 };
                assert_eq!(simulate_demo(&spec, &p, 17).unwrap(), greedy);
            }
        }
    }

    #[test]
    fn seeded_softmax_is_deterministic() {
        let spec = shipped::actual_task();
        let mut p = sample_population(1, &ArchetypeMix::default(), 2).remove(0);
        p.demo_policy = DemoPolicy::Softmax { beta: 2.0 };
        let a = simulate_demo(&spec, &p, 99).unwrap();
        assert_eq!(a, simulate_demo(&spec, &p, 99).unwrap());
        assert!(spec.validate_trace(a.actions()).is_ok());
    }
}
