//! Exact distribution of successful completion time.
//!
//! `q(T|x)` is the probability that an episode started in `x` ends in a goal
//! state at exactly time `T`:
//!
//! ```text
//! q(0|x) = 1 if x is a goal, else 0
//! q(T|x) = Σ_y p(x,y) q(T - τ_xy | y)    for T >= 1 and transient x
//! q(T|x) = 0                              for T >= 1 and terminal x, or T < 0
//! ```
//!
//! Every edge time is at least 1, so layer `T` only reads strictly earlier
//! layers and the table is filled forward in `T` without any iteration.

use crate::error::{Error, Result};
use crate::mdp::{Chain, StateId, StateKind};

/// Largest horizon [`horizon_for_tail`] will search.
pub const MAX_HORIZON: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    t_max: usize,
    num_states: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `q(T|x)`, zero for `T` beyond the horizon.
    pub fn get(&self, t: usize, x: StateId) -> f64 {
        if t > self.t_max {
            return 0.0;
        }
        self.values[t * self.num_states + x]
    }

    pub fn layer(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_states..(t + 1) * self.num_states]
    }

    /// `q(·|x)` for `T = 0..=t_max`.
    pub fn column(&self, x: StateId) -> impl Iterator<Item = f64> + '_ {
        (0..=self.t_max).map(move |t| self.get(t, x))
    }
}

/// Partial sums over `T <= t_max` of `q`, `T q` and `T² q`. Divide by `s(x)`
/// to compare with the conditional moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TruncatedMoments {
    pub mass: f64,
    pub mean_numerator: f64,
    pub second_numerator: f64,
}

impl TruncatedMoments {
    fn add(&mut self, t: usize, q: f64) {
        let t = t as f64;
        self.mass += q;
        self.mean_numerator += t * q;
        self.second_numerator += t * t * q;
    }
}

/// Full table of `q(T|x)` for `T = 0..=t_max`.
pub fn q_distribution(chain: &Chain, t_max: usize) -> Result<QTable> {
    chain.check()?;
    let n = chain.num_states();
    let mut values = vec![0.0; (t_max + 1) * n];
    for t in 0..=t_max {
        let (earlier, rest) = values.split_at_mut(t * n);
        next_layer(chain, t, &mut rest[..n], |lag, y| {
            (lag <= t).then(|| earlier[(t - lag) * n + y])
        });
    }
    Ok(QTable {
        t_max,
        num_states: n,
        values,
    })
}

pub fn truncated_moments(q: &QTable, x: StateId) -> TruncatedMoments {
    let mut moments = TruncatedMoments::default();
    for (t, value) in q.column(x).enumerate() {
        moments.add(t, value);
    }
    moments
}

/// Truncated moments for every state, keeping only the last `max τ + 1`
/// layers in memory. Bit-identical to [`truncated_moments`] on the full
/// table.
pub fn streaming_moments(chain: &Chain, t_max: usize) -> Result<Vec<TruncatedMoments>> {
    chain.check()?;
    let n = chain.num_states();
    let depth = chain.max_time() as usize + 1;
    let mut ring = vec![0.0; depth * n];
    let mut layer = vec![0.0; n];
    let mut moments = vec![TruncatedMoments::default(); n];
    for t in 0..=t_max {
        next_layer(chain, t, &mut layer, |lag, y| {
            (lag <= t).then(|| ring[((t - lag) % depth) * n + y])
        });
        for (m, &q) in moments.iter_mut().zip(&layer) {
            m.add(t, q);
        }
        ring[(t % depth) * n..(t % depth + 1) * n].copy_from_slice(&layer);
    }
    Ok(moments)
}

/// Where the completion-time tail falls below a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t_max: usize,
    /// `max_x P(T > t_max | x)` over all states, an upper bound on the mass
    /// defect `s(x) - Σ_{T <= t_max} q(T|x)`.
    pub tail: f64,
}

/// Smallest `t_max` with `P(T > t_max | x) < eps` for every state, where `T`
/// is the time to reach any terminal. Errors if the tail is still at least
/// `eps` at `cap` (at most [`MAX_HORIZON`]).
///
/// The tail obeys `G(t|x) = Σ_y p(x,y) G(t - τ_xy | y)` with `G(t|y) = 1`
/// for `t < 0` and `G(t|z) = 0` for terminal `z`, `t >= 0`, so it is computed
/// directly rather than as `1 - Σ r(T|x)`, which would cancel below 1e-16.
pub fn horizon_for_tail(chain: &Chain, eps: f64, cap: usize) -> Result<Horizon> {
    chain.check()?;
    let cap = cap.min(MAX_HORIZON);
    let n = chain.num_states();
    let depth = chain.max_time() as usize + 1;
    let mut ring = vec![0.0; depth * n];
    let mut layer = vec![0.0; n];
    let mut tail = 1.0;
    for t in 0..=cap {
        tail = 0.0f64;
        for (x, slot) in layer.iter_mut().enumerate() {
            *slot = if chain.is_terminal(x) {
                0.0
            } else {
                chain
                    .row(x)
                    .iter()
                    .map(|e| {
                        let lag = e.time as usize;
                        let g = if lag > t {
                            1.0
                        } else {
                            ring[((t - lag) % depth) * n + e.to]
                        };
                        e.prob * g
                    })
                    .sum()
            };
            tail = tail.max(*slot);
        }
        if tail < eps {
            return Ok(Horizon { t_max: t, tail });
        }
        ring[(t % depth) * n..(t % depth + 1) * n].copy_from_slice(&layer);
    }
    Err(Error::HorizonCap { cap, tail })
}

/// Fills layer `t` given access to earlier layers (`lookup(lag, y)` returns
/// `q(t - lag | y)`, or `None` when `lag > t`).
fn next_layer(
    chain: &Chain,
    t: usize,
    out: &mut [f64],
    lookup: impl Fn(usize, StateId) -> Option<f64>,
) {
    for (x, slot) in out.iter_mut().enumerate() {
        *slot = match chain.kind(x) {
            StateKind::Goal if t == 0 => 1.0,
            StateKind::Transient if t > 0 => chain
                .row(x)
                .iter()
                .map(|e| lookup(e.time as usize, e.to).map_or(0.0, |q| e.prob * q))
                .sum(),
            _ => 0.0,
        };
    }
}
