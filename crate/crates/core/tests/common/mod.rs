#![allow(dead_code)]

use episode_duration::mdp::{Chain, Edge, StateId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 0 transient, 1 goal.
pub fn geometric(p: f64) -> Chain {
    Chain::new(
        2,
        vec![Edge::new(0, 0, 1.0 - p, 1), Edge::new(0, 1, p, 1)],
        [1],
        [],
    )
}

/// 0 transient, 1 goal (τ = 1), 2 fail (τ = 3).
pub fn filtered() -> Chain {
    Chain::new(
        3,
        vec![Edge::new(0, 1, 0.5, 1), Edge::new(0, 2, 0.5, 3)],
        [1],
        [2],
    )
}

/// 0 -> goal directly or through 1, each with probability 0.5.
pub fn two_path() -> Chain {
    Chain::new(
        3,
        vec![
            Edge::new(0, 2, 0.5, 1),
            Edge::new(0, 1, 0.5, 1),
            Edge::new(1, 2, 1.0, 1),
        ],
        [2],
        [],
    )
}

/// Exact `(s, A, B)` of an acyclic chain by walking every trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct Enumerated {
    pub s: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

pub fn enumerate_trajectories(chain: &Chain, start: StateId) -> Enumerated {
    let mut mass = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    let mut stack = vec![(start, 1.0f64, 0u64)];
    while let Some((x, prob, time)) = stack.pop() {
        if chain.is_terminal(x) {
            if chain.goal_states().contains(&x) {
                let t = time as f64;
                mass += prob;
                first += prob * t;
                second += prob * t * t;
            }
            continue;
        }
        for e in chain.row(x) {
            stack.push((e.to, prob * e.prob, time + u64::from(e.time)));
        }
    }
    if mass > 0.0 {
        Enumerated {
            s: mass,
            a: Some(first / mass),
            b: Some(second / mass),
        }
    } else {
        Enumerated::default()
    }
}

/// Random DAG on `2..=max_states` states where edges only go to higher
/// indices. The last state is always terminal; other states are terminal
/// with some probability. Times are drawn from `1..=5`.
pub fn random_acyclic_chain(rng: &mut ChaCha8Rng, max_states: usize) -> Chain {
    let n = rng.gen_range(2..=max_states);
    let mut goals = Vec::new();
    let mut fails = Vec::new();
    for x in 0..n {
        if x == n - 1 || (x > 0 && rng.gen_bool(0.25)) {
            if rng.gen_bool(0.6) {
                goals.push(x);
            } else {
                fails.push(x);
            }
        }
    }
    let mut edges = Vec::new();
    for x in 0..n - 1 {
        if goals.contains(&x) || fails.contains(&x) {
            continue;
        }
        let mut targets: Vec<StateId> = (x + 1..n).collect();
        targets.shuffle(rng);
        let k = rng.gen_range(1..=targets.len().min(4));
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (&y, w) in targets.iter().take(k).zip(weights) {
            edges.push(Edge::new(x, y, w / total, rng.gen_range(1..=5)));
        }
    }
    Chain::new(n, edges, goals, fails)
}

/// Random chain with cycles: every transient state has an edge to a terminal
/// so absorption is certain.
pub fn random_cyclic_chain(rng: &mut ChaCha8Rng, n: usize) -> Chain {
    let n = n.max(3);
    let goal = n - 1;
    let fail = n - 2;
    let mut edges = Vec::new();
    for x in 0..n - 2 {
        let mut targets: Vec<StateId> = (0..n - 2).collect();
        targets.shuffle(rng);
        let k = rng.gen_range(1..=targets.len().min(3));
        let mut chosen: Vec<StateId> = targets.into_iter().take(k).collect();
        chosen.push(if rng.gen_bool(0.7) { goal } else { fail });
        let weights: Vec<f64> = chosen.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (y, w) in chosen.into_iter().zip(weights) {
            edges.push(Edge::new(x, y, w / total, rng.gen_range(1..=4)));
        }
    }
    Chain::new(n, edges, [goal], [fail])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
