//! Task-agnostic feature map and linear rewards.
//!
//! Every featurized state `s` (step `t >= 1`) is described by the latest
//! action `a`, the action before it `b`, and the phase `psi = t / N`:
//!
//! | index | feature          | value                          |
//! |-------|------------------|--------------------------------|
//! | 0     | same part        | `part(a) == part(b)`           |
//! | 1     | same tool        | `tool(a) == tool(b)`           |
//! | 2     | front physical   | `(1 - psi) * effort_p(a)`      |
//! | 3     | front mental     | `(1 - psi) * effort_m(a)`      |
//! | 4     | back physical    | `psi * effort_p(a)`            |
//! | 5     | back mental      | `psi * effort_m(a)`            |
//!
//! The phase is that of the successor state, so the first action is
//! featurized at `psi = 1/N` and the last at `psi = 1`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{ActionId, DemonstrationTrace, State, TaskSpec};

pub const NUM_FEATURES: usize = 6;

pub const SAME_PART: usize = 0;
pub const SAME_TOOL: usize = 1;
pub const FRONT_PHYSICAL: usize = 2;
pub const FRONT_MENTAL: usize = 3;
pub const BACK_PHYSICAL: usize = 4;
pub const BACK_MENTAL: usize = 5;

/// Feature names in vector order; also the keys used by the weights file.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "same_part",
    "same_tool",
    "front_physical",
    "front_mental",
    "back_physical",
    "back_mental",
];

/// Per-action physical and mental effort, normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct EffortRatings {
    physical: Vec<f64>,
    mental: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for EffortRatings {
    type Error = Error;

    fn try_from(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<EffortRatings> for Vec<(f64, f64)> {
    fn from(r: EffortRatings) -> Self {
        r.pairs().collect()
    }
}

impl EffortRatings {
    /// `pairs[a] = (physical, mental)` for action `a`, already in `[0, 1]`.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        for (a, &(p, m)) in pairs.iter().enumerate() {
            for v in [p, m] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::RatingOutOfBounds {
                        action: a,
                        value: v,
                        min: 0.0,
                        max: 1.0,
                    });
                }
            }
        }
        let (physical, mental) = pairs.into_iter().unzip();
        Ok(Self { physical, mental })
    }

    /// Normalizes raw questionnaire ratings by `(r - min) / (max - min)`.
    pub fn from_raw(raw: &[(f64, f64)], min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidConfig(format!(
                "rating scale [{min}, {max}] is empty"
            )));
        }
        let mut pairs = Vec::with_capacity(raw.len());
        for (a, &(p, m)) in raw.iter().enumerate() {
            for v in [p, m] {
                if !(min..=max).contains(&v) {
                    return Err(Error::RatingOutOfBounds {
                        action: a,
                        value: v,
                        min,
                        max,
                    });
                }
            }
            pairs.push(((p - min) / (max - min), (m - min) / (max - min)));
        }
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.physical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.physical.is_empty()
    }

    pub fn physical(&self, a: ActionId) -> f64 {
        self.physical[a]
    }

    pub fn mental(&self, a: ActionId) -> f64 {
        self.mental[a]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.physical
            .iter()
            .copied()
            .zip(self.mental.iter().copied())
    }

    pub fn check_covers(&self, spec: &TaskSpec) -> Result<()> {
        if self.len() != spec.num_actions() {
            return Err(Error::RatingsMismatch {
                expected: spec.num_actions(),
                actual: self.len(),
            });
        }
        Ok(())
    }
}

macro_rules! six_vector {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
        pub struct $name(pub [f64; NUM_FEATURES]);

        impl $name {
            pub const ZERO: Self = Self([0.0; NUM_FEATURES]);

            pub fn as_array(&self) -> &[f64; NUM_FEATURES] {
                &self.0
            }

            pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
                self.0.iter().copied()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $name {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                for (x, y) in self.0.iter_mut().zip(rhs.0) {
                    *x += y;
                }
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                for (x, y) in self.0.iter_mut().zip(rhs.0) {
                    *x -= y;
                }
                self
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(mut self, c: f64) -> Self {
                for x in self.0.iter_mut() {
                    *x *= c;
                }
                self
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "[")?;
                for (i, v) in self.0.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v:.4}")?;
                }
                write!(f, "]")
            }
        }
    };
}

six_vector!(FeatureVector);
six_vector!(WeightVector);

impl From<FeatureVector> for WeightVector {
    fn from(f: FeatureVector) -> Self {
        WeightVector(f.0)
    }
}

/// Linear reward `w . f`.
pub fn reward(w: &WeightVector, f: &FeatureVector) -> f64 {
    w.0.iter().zip(f.0.iter()).map(|(a, b)| a * b).sum()
}

fn transition_features(
    spec: &TaskSpec,
    ratings: &EffortRatings,
    latest: ActionId,
    before: Option<ActionId>,
    step: usize,
) -> FeatureVector {
    let act = &spec.actions()[latest];
    let (same_part, same_tool) = match before.map(|b| &spec.actions()[b]) {
        Some(prev) => (
            (prev.part_id == act.part_id) as u8 as f64,
            (prev.tool_id == act.tool_id) as u8 as f64,
        ),
        None => (0.0, 0.0),
    };
    let psi = step as f64 / spec.total_steps() as f64;
    let (p, m) = (ratings.physical(latest), ratings.mental(latest));
    FeatureVector([
        same_part,
        same_tool,
        (1.0 - psi) * p,
        (1.0 - psi) * m,
        psi * p,
        psi * m,
    ])
}

/// Feature vector of a state reached by at least one action.
pub fn featurize(spec: &TaskSpec, ratings: &EffortRatings, s: &State) -> Result<FeatureVector> {
    ratings.check_covers(spec)?;
    let latest = s.prev_action.ok_or(Error::NoLatestAction)?;
    if s.step == 0 || s.step > spec.total_steps() {
        return Err(Error::InvalidState(format!(
            "step {} outside 1..={}",
            s.step,
            spec.total_steps()
        )));
    }
    if latest >= spec.num_actions() || s.prev_prev_action.is_some_and(|b| b >= spec.num_actions()) {
        return Err(Error::InvalidState(
            "history references unknown action".into(),
        ));
    }
    Ok(transition_features(
        spec,
        ratings,
        latest,
        s.prev_prev_action,
        s.step,
    ))
}

/// Sum of the features of every state visited by `trace` after step 0.
pub fn empirical_feature_counts(
    spec: &TaskSpec,
    ratings: &EffortRatings,
    trace: &DemonstrationTrace,
) -> Result<FeatureVector> {
    spec.validate_trace(trace.actions())?;
    ratings.check_covers(spec)?;
    let mut counts = FeatureVector::ZERO;
    for s in trace.successor_states(spec) {
        counts += featurize(spec, ratings, &s)?;
    }
    Ok(counts)
}

/// Features depend only on (step, latest action, previous action), so they
/// can be tabulated once per (task, ratings) pair.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    num_actions: usize,
    table: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn new(spec: &TaskSpec, ratings: &EffortRatings) -> Result<Self> {
        ratings.check_covers(spec)?;
        let k = spec.num_actions();
        let mut table = Vec::with_capacity(spec.total_steps() * k * (k + 1));
        for step in 1..=spec.total_steps() {
            for a in 0..k {
                table.push(transition_features(spec, ratings, a, None, step));
                for b in 0..k {
                    table.push(transition_features(spec, ratings, a, Some(b), step));
                }
            }
        }
        Ok(Self {
            num_actions: k,
            table,
        })
    }

    /// Same result as [`featurize`] for a state with this history.
    pub fn get(&self, step: usize, latest: ActionId, before: Option<ActionId>) -> &FeatureVector {
        let k = self.num_actions;
        let b = before.map_or(0, |b| b + 1);
        &self.table[((step - 1) * k + latest) * (k + 1) + b]
    }

    pub fn of_state(&self, s: &State) -> &FeatureVector {
        self.get(
            s.step,
            s.prev_action
                .expect("featurized states have a latest action"),
            s.prev_prev_action,
        )
    }

    /// Rewards for every table entry under `w`, laid out like the table.
    pub fn rewards(&self, w: &WeightVector) -> RewardTable {
        RewardTable {
            num_actions: self.num_actions,
            table: self.table.iter().map(|f| reward(w, f)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RewardTable {
    num_actions: usize,
    table: Vec<f64>,
}

impl RewardTable {
    pub fn get(&self, step: usize, latest: ActionId, before: Option<ActionId>) -> f64 {
        let k = self.num_actions;
        let b = before.map_or(0, |b| b + 1);
        self.table[((step - 1) * k + latest) * (k + 1) + b]
    }

    pub fn of_state(&self, s: &State) -> f64 {
        self.get(
            s.step,
            s.prev_action.expect("rewarded states have a latest action"),
            s.prev_prev_action,
        )
    }
}
