//! Layered graph of all states reachable from a task's initial state.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::task::{ActionId, State, TaskSpec};

pub const DEFAULT_STATE_CAP: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub action: ActionId,
    pub target: usize,
}

/// States are stored contiguously by layer (step), edges in CSR form.
/// Index 0 is always the initial state. Immutable once built.
#[derive(Debug, Clone)]
pub struct StateGraph {
    spec: TaskSpec,
    states: Vec<State>,
    layer_starts: Vec<usize>,
    edge_offsets: Vec<usize>,
    edges: Vec<Edge>,
    index: HashMap<State, usize>,
}

pub fn enumerate_states(spec: &TaskSpec) -> Result<StateGraph> {
    enumerate_states_capped(spec, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_capped(spec: &TaskSpec, cap: usize) -> Result<StateGraph> {
    let initial = spec.initial_state();
    let mut states = vec![initial.clone()];
    let mut index = HashMap::from([(initial, 0usize)]);
    let mut layer_starts = vec![0usize];
    let mut edge_offsets = vec![0usize];
    let mut edges = Vec::new();

    if cap == 0 {
        return Err(Error::GraphTooLarge { cap });
    }

    // Expanding layer t appends layer t+1 right behind it.
    for _ in 0..spec.total_steps() {
        let start = *layer_starts.last().unwrap();
        let end = states.len();
        layer_starts.push(end);
        for i in start..end {
            let s = states[i].clone();
            for a in spec.feasible_actions(&s)? {
                let next = spec.apply_action(&s, a)?;
                let target = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= cap {
                            return Err(Error::GraphTooLarge { cap });
                        }
                        let j = states.len();
                        index.insert(next.clone(), j);
                        states.push(next);
                        j
                    }
                };
                edges.push(Edge { action: a, target });
            }
            edge_offsets.push(edges.len());
        }
    }
    // terminal layer: no outgoing edges
    let last_start = *layer_starts.last().unwrap();
    for _ in last_start..states.len() {
        edge_offsets.push(edges.len());
    }
    layer_starts.push(states.len());

    Ok(StateGraph {
        spec: spec.clone(),
        states,
        layer_starts,
        edge_offsets,
        edges,
        index,
    })
}

impl StateGraph {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of layers, N + 1.
    pub fn num_layers(&self) -> usize {
        self.layer_starts.len() - 1
    }

    pub fn layer(&self, step: usize) -> Range<usize> {
        self.layer_starts[step]..self.layer_starts[step + 1]
    }

    pub fn state(&self, i: usize) -> &State {
        &self.states[i]
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn edges(&self, i: usize) -> &[Edge] {
        &self.edges[self.edge_offsets[i]..self.edge_offsets[i + 1]]
    }

    /// Offset of state `i`'s first edge in the flat edge list; per-edge
    /// tables (policies, Q values) share this layout.
    pub fn edge_range(&self, i: usize) -> Range<usize> {
        self.edge_offsets[i]..self.edge_offsets[i + 1]
    }

    pub fn index_of(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn initial(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shipped;
    use std::collections::HashSet;

    fn dfs_reachable(spec: &TaskSpec) -> HashSet<State> {
        let mut seen = HashSet::new();
        let mut stack = vec![spec.initial_state()];
        while let Some(s) = stack.pop() {
            if !seen.insert(s.clone()) {
                continue;
            }
            for a in spec.feasible_actions(&s).unwrap() {
                stack.push(spec.apply_action(&s, a).unwrap());
            }
        }
        seen
    }

    fn check_structure(g: &StateGraph) {
        let spec = g.spec();
        assert_eq!(g.num_layers(), spec.total_steps() + 1);
        assert_eq!(g.layer(0), 0..1);
        for t in 0..g.num_layers() {
            for i in g.layer(t) {
                let s = g.state(i);
                assert_eq!(s.step, t);
                let executed: u32 = spec
                    .actions()
                    .iter()
                    .map(|a| a.repeat_count - s.remaining[a.id])
                    .sum();
                assert_eq!(executed as usize, t);
                for e in g.edges(i) {
                    assert!(g.layer(t + 1).contains(&e.target));
                }
                if t == spec.total_steps() {
                    assert!(g.edges(i).is_empty());
                } else {
                    assert!(!g.edges(i).is_empty());
                }
            }
        }
    }

    #[test]
    fn canonical_graph_matches_dfs() {
        let spec = shipped::canonical_task();
        let g = enumerate_states(&spec).unwrap();
        let dfs = dfs_reachable(&spec);
        assert_eq!(g.num_states(), dfs.len());
        for s in g.states() {
            assert!(dfs.contains(s));
        }
        check_structure(&g);
    }

    #[test]
    fn actual_graph_matches_dfs() {
        let spec = shipped::actual_task();
        let g = enumerate_states(&spec).unwrap();
        assert_eq!(g.num_states(), dfs_reachable(&spec).len());
        check_structure(&g);
    }

    #[test]
    fn one_action_task_has_two_states() {
        let spec = TaskSpec::builder("one")
            .action("only", "p", "t", 1)
            .build()
            .unwrap();
        let g = enumerate_states(&spec).unwrap();
        assert_eq!(g.num_states(), 2);
        assert_eq!(
            g.edges(0),
            &[Edge {
                action: 0,
                target: 1
            }]
        );
    }

    #[test]
    fn cap_is_enforced() {
        let spec = shipped::canonical_task();
        assert_eq!(
            enumerate_states_capped(&spec, 10).unwrap_err(),
            Error::GraphTooLarge { cap: 10 }
        );
    }
}
