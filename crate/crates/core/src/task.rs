//! Assembly tasks as deterministic finite-horizon MDPs.
//!
//! A task is a multiset of typed actions (each type with a repetition count)
//! plus precedence rules between action types. The MDP state is the vector of
//! remaining repetitions augmented with the two most recently executed action
//! types, which is all the feature map ever looks at.
//!
//! Precedence is count-coupled: an action of type `after` may run only while
//! more `before` actions than `after` actions have been executed. For
//! one-shot actions this is ordinary "before precedes after"; for repeated
//! actions (insert bolt / screw bolt, four times each) it allows interleaving.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionType {
    pub id: ActionId,
    pub label: String,
    pub part_id: usize,
    pub tool_id: usize,
    pub repeat_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecedenceRule {
    pub pred_id: ActionId,
    pub succ_id: ActionId,
}

impl fmt::Display for PrecedenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.pred_id, self.succ_id)
    }
}

/// A validated assembly task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    task_id: String,
    actions: Vec<ActionType>,
    precedence: Vec<PrecedenceRule>,
    parts: Vec<String>,
    tools: Vec<String>,
    total_steps: usize,
}

/// Augmented MDP state.
///
/// Identity is `(remaining, prev_action, prev_prev_action)`; `step` is
/// derivable from `remaining` and kept for convenience.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub remaining: Vec<u32>,
    pub prev_action: Option<ActionId>,
    pub prev_prev_action: Option<ActionId>,
    pub step: usize,
}

impl State {
    pub fn is_terminal(&self) -> bool {
        self.remaining.iter().all(|&r| r == 0)
    }
}

/// An ordered action sequence already checked against its task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemonstrationTrace {
    actions: Vec<ActionId>,
}

impl DemonstrationTrace {
    pub fn new(spec: &TaskSpec, actions: Vec<ActionId>) -> Result<Self> {
        spec.validate_trace(&actions)?;
        Ok(Self { actions })
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// States reached after each step, `states[t-1]` being the state at step `t`.
    pub fn successor_states(&self, spec: &TaskSpec) -> Vec<State> {
        let mut state = spec.initial_state();
        self.actions
            .iter()
            .map(|&a| {
                state = spec
                    .apply_action(&state, a)
                    .expect("validated trace replays");
                state.clone()
            })
            .collect()
    }
}

impl TaskSpec {
    /// Builds a task from explicit ids. Part and tool names are indexed by
    /// `part_id` / `tool_id`.
    pub fn new(
        task_id: impl Into<String>,
        actions: Vec<ActionType>,
        precedence: Vec<PrecedenceRule>,
        parts: Vec<String>,
        tools: Vec<String>,
    ) -> Result<Self> {
        let task_id = task_id.into();
        if actions.is_empty() {
            return Err(Error::InvalidTask("task has no actions".into()));
        }
        for (i, a) in actions.iter().enumerate() {
            if a.id != i {
                return Err(Error::InvalidTask(format!(
                    "action ids must be dense 0..{}; found {} at position {}",
                    actions.len(),
                    a.id,
                    i
                )));
            }
            if a.repeat_count == 0 {
                return Err(Error::InvalidTask(format!(
                    "action {} has repeat count 0",
                    a.id
                )));
            }
            if a.part_id >= parts.len() {
                return Err(Error::InvalidTask(format!(
                    "action {} references unknown part {}",
                    a.id, a.part_id
                )));
            }
            if a.tool_id >= tools.len() {
                return Err(Error::InvalidTask(format!(
                    "action {} references unknown tool {}",
                    a.id, a.tool_id
                )));
            }
        }
        let k = actions.len();
        for rule in &precedence {
            if rule.pred_id >= k || rule.succ_id >= k {
                return Err(Error::InvalidTask(format!(
                    "precedence {rule} references an unknown action"
                )));
            }
            if rule.pred_id == rule.succ_id {
                return Err(Error::InvalidTask(format!(
                    "precedence {rule} relates an action to itself"
                )));
            }
            // Otherwise some `succ` repetitions can never become executable.
            if actions[rule.pred_id].repeat_count < actions[rule.succ_id].repeat_count {
                return Err(Error::InvalidTask(format!(
                    "precedence {rule}: successor repeats {} times but predecessor only {}",
                    actions[rule.succ_id].repeat_count, actions[rule.pred_id].repeat_count
                )));
            }
        }
        if let Some(cycle) = find_cycle(k, &precedence) {
            return Err(Error::PrecedenceCycle(cycle));
        }
        let total_steps = actions.iter().map(|a| a.repeat_count as usize).sum();
        let spec = Self {
            task_id,
            actions,
            precedence,
            parts,
            tools,
            total_steps,
        };
        if spec.feasible_actions(&spec.initial_state())?.is_empty() {
            return Err(Error::InvalidTask(
                "no action is executable in the initial state".into(),
            ));
        }
        Ok(spec)
    }

    pub fn builder(task_id: impl Into<String>) -> TaskBuilder {
        TaskBuilder {
            task_id: task_id.into(),
            actions: Vec::new(),
            precedence: Vec::new(),
            parts: Vec::new(),
            tools: Vec::new(),
        }
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn actions(&self) -> &[ActionType] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> Option<&ActionType> {
        self.actions.get(id)
    }

    pub fn precedence(&self) -> &[PrecedenceRule] {
        &self.precedence
    }

    pub fn parts(&self) -> &[String] {
        &self.parts
    }

    pub fn tools(&self) -> &[String] {
        &self.tools
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Horizon N: the sum of all repeat counts.
    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn initial_state(&self) -> State {
        State {
            remaining: self.actions.iter().map(|a| a.repeat_count).collect(),
            prev_action: None,
            prev_prev_action: None,
            step: 0,
        }
    }

    fn check_state(&self, s: &State) -> Result<()> {
        if s.remaining.len() != self.actions.len() {
            return Err(Error::InvalidState(format!(
                "remaining vector has length {}, task has {} action types",
                s.remaining.len(),
                self.actions.len()
            )));
        }
        let mut executed = 0usize;
        for (a, &r) in self.actions.iter().zip(&s.remaining) {
            if r > a.repeat_count {
                return Err(Error::InvalidState(format!(
                    "action {} has {} remaining but repeats only {} times",
                    a.id, r, a.repeat_count
                )));
            }
            executed += (a.repeat_count - r) as usize;
        }
        if executed != s.step {
            return Err(Error::InvalidState(format!(
                "step {} disagrees with {} executed actions",
                s.step, executed
            )));
        }
        Ok(())
    }

    fn executed(&self, s: &State, id: ActionId) -> u32 {
        self.actions[id].repeat_count - s.remaining[id]
    }

    /// First rule that blocks `a` in `s`, if any.
    fn blocking_rule(&self, s: &State, a: ActionId) -> Option<PrecedenceRule> {
        self.precedence
            .iter()
            .find(|r| r.succ_id == a && self.executed(s, r.pred_id) <= self.executed(s, a))
            .copied()
    }

    /// Ids executable in `s`, in increasing order.
    pub fn feasible_actions(&self, s: &State) -> Result<Vec<ActionId>> {
        self.check_state(s)?;
        Ok((0..self.actions.len())
            .filter(|&a| s.remaining[a] > 0 && self.blocking_rule(s, a).is_none())
            .collect())
    }

    pub fn apply_action(&self, s: &State, a: ActionId) -> Result<State> {
        self.check_state(s)?;
        if a >= self.actions.len() {
            return Err(Error::UnknownAction(a));
        }
        if s.remaining[a] == 0 {
            return Err(Error::ExhaustedAction { action: a });
        }
        if let Some(rule) = self.blocking_rule(s, a) {
            return Err(Error::PrecedenceViolation { action: a, rule });
        }
        let mut remaining = s.remaining.clone();
        remaining[a] -= 1;
        Ok(State {
            remaining,
            prev_action: Some(a),
            prev_prev_action: s.prev_action,
            step: s.step + 1,
        })
    }

    /// Checks that `seq` has length N and replays feasibly from the initial state.
    pub fn validate_trace(&self, seq: &[ActionId]) -> Result<()> {
        if seq.len() != self.total_steps {
            return Err(Error::TraceLength {
                expected: self.total_steps,
                actual: seq.len(),
            });
        }
        let mut state = self.initial_state();
        for (index, &a) in seq.iter().enumerate() {
            state = self
                .apply_action(&state, a)
                .map_err(|e| Error::InfeasibleStep {
                    index,
                    source: Box::new(e),
                })?;
        }
        Ok(())
    }
}

/// Incremental construction with part and tool names interned in order of
/// first appearance.
#[derive(Debug, Clone)]
pub struct TaskBuilder {
    task_id: String,
    actions: Vec<ActionType>,
    precedence: Vec<PrecedenceRule>,
    parts: Vec<String>,
    tools: Vec<String>,
}

fn intern(names: &mut Vec<String>, name: &str) -> usize {
    match names.iter().position(|n| n == name) {
        Some(i) => i,
        None => {
            names.push(name.to_string());
            names.len() - 1
        }
    }
}

impl TaskBuilder {
    pub fn action(mut self, label: &str, part: &str, tool: &str, repeat_count: u32) -> Self {
        let part_id = intern(&mut self.parts, part);
        let tool_id = intern(&mut self.tools, tool);
        self.actions.push(ActionType {
            id: self.actions.len(),
            label: label.to_string(),
            part_id,
            tool_id,
            repeat_count,
        });
        self
    }

    pub fn precede(mut self, pred_id: ActionId, succ_id: ActionId) -> Self {
        self.precedence.push(PrecedenceRule { pred_id, succ_id });
        self
    }

    pub fn build(self) -> Result<TaskSpec> {
        TaskSpec::new(
            self.task_id,
            self.actions,
            self.precedence,
            self.parts,
            self.tools,
        )
    }
}

fn find_cycle(k: usize, rules: &[PrecedenceRule]) -> Option<Vec<ActionId>> {
    let mut succs: HashMap<ActionId, Vec<ActionId>> = HashMap::new();
    for r in rules {
        succs.entry(r.pred_id).or_default().push(r.succ_id);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; k];
    let mut stack: Vec<ActionId> = Vec::new();

    fn visit(
        v: ActionId,
        succs: &HashMap<ActionId, Vec<ActionId>>,
        color: &mut [u8],
        stack: &mut Vec<ActionId>,
    ) -> Option<Vec<ActionId>> {
        color[v] = 1;
        stack.push(v);
        for &w in succs.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            match color[w] {
                1 => {
                    let start = stack.iter().position(|&x| x == w).unwrap();
                    return Some(stack[start..].to_vec());
                }
                0 => {
                    if let Some(c) = visit(w, succs, color, stack) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        stack.pop();
        color[v] = 2;
        None
    }

    (0..k).find_map(|v| {
        if color[v] == 0 {
            visit(v, &succs, &mut color, &mut stack)
        } else {
            None
        }
    })
}
