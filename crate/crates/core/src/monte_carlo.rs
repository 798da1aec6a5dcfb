//! Episode simulation and Monte Carlo estimates of `s`, `A` and `D`.
//!
//! Episode `i` of a run seeded with `seed` draws from ChaCha8 stream `i` of
//! that seed, so every episode is reproducible on its own and an estimate does
//! not depend on the order episodes are run in.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{Chain, StateId, StateKind};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    /// Visited states `b_0, ..., b_K`.
    pub states: Vec<StateId>,
    pub total_time: u64,
    pub successful: bool,
    /// The step cap was hit before reaching a terminal state.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n_total: u64,
    pub n_success: u64,
    pub n_truncated: u64,
    /// Truncated episodes count as failures here.
    pub s_hat: f64,
    /// Mean duration of successful episodes; needs at least two successes.
    pub a_hat: Option<f64>,
    /// Population standard deviation of successful durations.
    pub d_hat: Option<f64>,
    pub se_s: f64,
    pub se_a: Option<f64>,
    pub seed: u64,
}

/// RNG for episode `index` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_episode<R: Rng>(
    chain: &Chain,
    start: StateId,
    rng: &mut R,
    step_cap: u64,
) -> Result<Episode> {
    chain.check()?;
    check_start(chain, start)?;
    let mut states = vec![start];
    let outcome = run(chain, start, rng, step_cap, |x| states.push(x));
    Ok(Episode {
        states,
        total_time: outcome.time,
        successful: outcome.successful,
        truncated: outcome.truncated,
    })
}

/// Runs `n_episodes` episodes from `start` and summarizes them.
pub fn estimate(
    chain: &Chain,
    start: StateId,
    n_episodes: u64,
    seed: u64,
    step_cap: u64,
) -> Result<McEstimate> {
    chain.check()?;
    check_start(chain, start)?;

    let mut n_success = 0u64;
    let mut n_truncated = 0u64;
    // Integer sums keep aggregation exact and order independent.
    let mut sum_t = 0u128;
    let mut sum_t2 = 0u128;
    for index in 0..n_episodes {
        let mut rng = episode_rng(seed, index);
        let outcome = run(chain, start, &mut rng, step_cap, |_| {});
        if outcome.truncated {
            n_truncated += 1;
        } else if outcome.successful {
            n_success += 1;
            let t = u128::from(outcome.time);
            sum_t += t;
            sum_t2 += t * t;
        }
    }

    let n = n_episodes as f64;
    let s_hat = if n_episodes == 0 {
        0.0
    } else {
        n_success as f64 / n
    };
    let se_s = if n_episodes == 0 {
        0.0
    } else {
        (s_hat * (1.0 - s_hat) / n).sqrt()
    };

    let (a_hat, d_hat, se_a) = if n_success >= 2 {
        let k = u128::from(n_success);
        let mean = sum_t as f64 / n_success as f64;
        // n² Var = n Σt² - (Σt)², exact in integers
        let scaled_var = k * sum_t2 - sum_t * sum_t;
        let sd = ((scaled_var as f64) / (n_success as f64 * n_success as f64)).sqrt();
        (Some(mean), Some(sd), Some(sd / (n_success as f64).sqrt()))
    } else {
        (None, None, None)
    };

    Ok(McEstimate {
        n_total: n_episodes,
        n_success,
        n_truncated,
        s_hat,
        a_hat,
        d_hat,
        se_s,
        se_a,
        seed,
    })
}

struct Outcome {
    time: u64,
    successful: bool,
    truncated: bool,
}

fn run<R: Rng>(
    chain: &Chain,
    start: StateId,
    rng: &mut R,
    step_cap: u64,
    mut visit: impl FnMut(StateId),
) -> Outcome {
    let mut state = start;
    let mut time = 0u64;
    let mut steps = 0u64;
    while !chain.is_terminal(state) {
        if steps == step_cap {
            return Outcome {
                time,
                successful: false,
                truncated: true,
            };
        }
        let row = chain.row(state);
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut chosen = row[row.len() - 1];
        for edge in row {
            cumulative += edge.prob;
            if u < cumulative {
                chosen = *edge;
                break;
            }
        }
        state = chosen.to;
        time += u64::from(chosen.time);
        steps += 1;
        visit(state);
    }
    Outcome {
        time,
        successful: chain.kind(state) == StateKind::Goal,
        truncated: false,
    }
}

fn check_start(chain: &Chain, start: StateId) -> Result<()> {
    if start < chain.num_states() {
        Ok(())
    } else {
        Err(Error::StateOutOfRange {
            state: start,
            num_states: chain.num_states(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Edge;

    fn geometric() -> Chain {
        Chain::new(
            2,
            vec![Edge::new(0, 0, 0.5, 1), Edge::new(0, 1, 0.5, 1)],
            [1],
            [],
        )
    }

    fn filtered() -> Chain {
        Chain::new(
            3,
            vec![Edge::new(0, 1, 0.5, 1), Edge::new(0, 2, 0.5, 3)],
            [1],
            [2],
        )
    }

    #[test]
    fn start_at_goal_is_empty_episode() {
        let chain = geometric();
        let ep = simulate_episode(&chain, 1, &mut episode_rng(0, 0), 10).unwrap();
        assert_eq!(
            ep,
            Episode {
                states: vec![1],
                total_time: 0,
                successful: true,
                truncated: false
            }
        );
    }

    #[test]
    fn forced_path() {
        let chain = Chain::new(2, vec![Edge::new(0, 1, 1.0, 3)], [1], []);
        let ep = simulate_episode(&chain, 0, &mut episode_rng(9, 0), 10).unwrap();
        assert_eq!(ep.states, vec![0, 1]);
        assert_eq!(ep.total_time, 3);
        assert!(ep.successful && !ep.truncated);
    }

    #[test]
    fn same_seed_same_episode() {
        let chain = geometric();
        let a = simulate_episode(&chain, 0, &mut episode_rng(42, 7), 1000).unwrap();
        let b = simulate_episode(&chain, 0, &mut episode_rng(42, 7), 1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_time as usize, a.states.len() - 1);
    }

    #[test]
    fn step_cap_truncates() {
        let stuck = Chain::new(2, vec![Edge::new(0, 0, 1.0, 2)], [1], []);
        let ep = simulate_episode(&stuck, 0, &mut episode_rng(0, 0), 5).unwrap();
        assert!(ep.truncated && !ep.successful);
        assert_eq!(ep.states.len(), 6);
        assert_eq!(ep.total_time, 10);

        let est = estimate(&stuck, 0, 20, 0, 5).unwrap();
        assert_eq!(est.n_truncated, 20);
        assert_eq!(est.n_success, 0);
        assert_eq!(est.s_hat, 0.0);
        assert_eq!(est.a_hat, None);
    }

    #[test]
    fn deterministic_chain_estimate() {
        let chain = Chain::new(2, vec![Edge::new(0, 1, 1.0, 3)], [1], []);
        let est = estimate(&chain, 0, 100, 1, DEFAULT_STEP_CAP).unwrap();
        assert_eq!(est.s_hat, 1.0);
        assert_eq!(est.a_hat, Some(3.0));
        assert_eq!(est.d_hat, Some(0.0));
        assert_eq!(est.se_s, 0.0);
    }

    #[test]
    fn filtered_estimate() {
        let est = estimate(&filtered(), 0, 100_000, 3, DEFAULT_STEP_CAP).unwrap();
        assert!((est.s_hat - 0.5).abs() <= 3.0 * est.se_s);
        assert_eq!(est.a_hat, Some(1.0));
        assert_eq!(est.d_hat, Some(0.0));
    }

    #[test]
    fn geometric_estimate() {
        let est = estimate(&geometric(), 0, 100_000, 5, DEFAULT_STEP_CAP).unwrap();
        let se_a = est.se_a.unwrap();
        assert!((est.a_hat.unwrap() - 2.0).abs() <= 3.0 * se_a);
        assert!((est.d_hat.unwrap() - 2f64.sqrt()).abs() < 0.02);
    }

    #[test]
    fn single_success_has_no_mean() {
        let chain = Chain::new(2, vec![Edge::new(0, 1, 1.0, 3)], [1], []);
        let est = estimate(&chain, 0, 1, 0, 10).unwrap();
        assert_eq!(est.n_success, 1);
        assert_eq!(est.a_hat, None);
    }

    #[test]
    fn estimate_matches_individual_episodes() {
        let chain = geometric();
        let est = estimate(&chain, 0, 50, 11, 100).unwrap();
        let times: Vec<f64> = (0..50)
            .map(|i| {
                simulate_episode(&chain, 0, &mut episode_rng(11, i), 100)
                    .unwrap()
                    .total_time as f64
            })
            .collect();
        let mean = times.iter().sum::<f64>() / 50.0;
        assert!((est.a_hat.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_start() {
        assert!(matches!(
            estimate(&geometric(), 5, 1, 0, 10),
            Err(Error::StateOutOfRange { state: 5, .. })
        ));
    }
}
