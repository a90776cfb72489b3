#![allow(dead_code)]

use prefxfer_core::{ActionId, EffortRatings, State, TaskSpec};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random valid task with at most `max_types` action types and `max_steps`
/// total steps. Precedence follows a random permutation, so it is acyclic.
pub fn random_task<R: Rng>(rng: &mut R, max_types: usize, max_steps: usize) -> TaskSpec {
    let k = rng.gen_range(1..=max_types.min(max_steps));
    let mut repeats = vec![1u32; k];
    for _ in 0..rng.gen_range(0..=max_steps - k) {
        let a = rng.gen_range(0..k);
        if repeats[a] < 3 {
            repeats[a] += 1;
        }
    }
    let parts = ["plate", "frame", "wheel"];
    let tools = ["hand", "screwdriver", "wrench"];
    let mut b = TaskSpec::builder(format!("random-{}", rng.gen::<u32>()));
    for (i, &r) in repeats.iter().enumerate() {
        b = b.action(
            &format!("action {i}"),
            parts.choose(rng).unwrap(),
            tools.choose(rng).unwrap(),
            r,
        );
    }
    let mut order: Vec<ActionId> = (0..k).collect();
    order.shuffle(rng);
    for i in 0..k {
        for j in i + 1..k {
            let (p, s) = (order[i], order[j]);
            if rng.gen_bool(0.3) && repeats[p] >= repeats[s] {
                b = b.precede(p, s);
            }
        }
    }
    b.build().expect("generated task is valid")
}

pub fn random_ratings<R: Rng>(rng: &mut R, k: usize) -> EffortRatings {
    EffortRatings::new((0..k).map(|_| (rng.gen(), rng.gen())).collect()).unwrap()
}

/// Every complete feasible sequence from `s`.
pub fn all_sequences(
    spec: &TaskSpec,
    s: &State,
    prefix: &mut Vec<ActionId>,
    out: &mut Vec<Vec<ActionId>>,
) {
    let feasible = spec.feasible_actions(s).unwrap();
    if feasible.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for a in feasible {
        prefix.push(a);
        all_sequences(spec, &spec.apply_action(s, a).unwrap(), prefix, out);
        prefix.pop();
    }
}
