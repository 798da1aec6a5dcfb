//! Three-phase fixed-point solver for success probability `s`, conditional
//! mean duration `A`, conditional second moment `B`, and the standard
//! deviation `D = sqrt(B - A²)` of successful-episode duration.
//!
//! Each phase runs Jacobi sweeps (every state updated from the previous
//! iterate) until the largest relative change drops to the tolerance:
//!
//! ```text
//! s(x) = Σ_y p(x,y) s(y)
//! A(x) = 1/s(x) Σ_y p(x,y) s(y) [A(y) + τ_xy]
//! B(x) = 1/s(x) Σ_y p(x,y) s(y) [B(y) + 2 τ_xy A(y) + τ_xy²]
//! ```
//!
//! with `s = 1` on goals, `s = 0` on fail states and `A = B = 0` on goals.
//! `A`, `B` and `D` are left undefined where `s(x) <= S_FLOOR`.
//!
//! The stopping rule is relative so that states with very small but positive
//! `s` still get accurate conditioning weights `p(x,y) s(y) / s(x)`, and it
//! also requires the estimated remaining error to be within the tolerance.

use crate::error::{Error, Result};
use crate::mdp::{Chain, StateId, StateKind};

/// States with success probability at or below this get no duration moments.
pub const S_FLOOR: f64 = 1e-12;

/// Negative variance radicands down to `-VARIANCE_SLACK` are roundoff.
pub const VARIANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Stop once every state's sweep-to-sweep change, relative to its new
    /// value, is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Run exactly this many sweeps per phase and ignore the tolerance.
    pub fixed_iterations: Option<usize>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 10_000,
            fixed_iterations: None,
        }
    }
}

impl SolveConfig {
    pub fn fixed(iterations: usize) -> Self {
        Self {
            fixed_iterations: Some(iterations),
            ..Self::default()
        }
    }

    fn sweep_limit(&self) -> usize {
        self.fixed_iterations.unwrap_or(self.max_iterations)
    }
}

/// Convergence diagnostics of one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReport {
    pub iterations: usize,
    /// Largest relative change of the last sweep.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub s: Vec<f64>,
    pub a: Vec<Option<f64>>,
    pub b: Vec<Option<f64>>,
    pub d: Vec<Option<f64>>,
    pub success: PhaseReport,
    pub mean: PhaseReport,
    pub second_moment: PhaseReport,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.success.converged && self.mean.converged && self.second_moment.converged
    }

    /// `B(x) - A(x)²`, clamped at zero.
    pub fn variance(&self, x: StateId) -> Option<f64> {
        self.d[x].map(|d| d * d)
    }

    pub fn phases(&self) -> [(&'static str, PhaseReport); 3] {
        [
            ("s", self.success),
            ("A", self.mean),
            ("B", self.second_moment),
        ]
    }
}

/// Success probability of every state, iterated up from `s = 0`.
pub fn solve_success(chain: &Chain, config: &SolveConfig) -> Result<(Vec<f64>, PhaseReport)> {
    chain.check()?;
    let n = chain.num_states();
    let init: Vec<f64> = (0..n)
        .map(|x| match chain.kind(x) {
            StateKind::Goal => 1.0,
            _ => 0.0,
        })
        .collect();
    let active: Vec<StateId> = (0..n).filter(|&x| !chain.is_terminal(x)).collect();
    Ok(jacobi(init, &active, config, |x, s| {
        chain.row(x).iter().map(|e| e.prob * s[e.to]).sum()
    }))
}

/// Conditional mean duration of successful episodes.
pub fn solve_mean(
    chain: &Chain,
    s: &[f64],
    config: &SolveConfig,
) -> Result<(Vec<Option<f64>>, PhaseReport)> {
    chain.check()?;
    let weights = ConditionedWeights::new(chain, s);
    let (a, report) = iterate_mean(chain, &weights, config);
    Ok((weights.mask(a), report))
}

/// Conditional second moment of successful-episode duration.
///
/// States with `0 < s(x) <= S_FLOOR` still feed their neighbours, so any mean
/// missing for them in `a` is recomputed internally.
pub fn solve_second_moment(
    chain: &Chain,
    s: &[f64],
    a: &[Option<f64>],
    config: &SolveConfig,
) -> Result<(Vec<Option<f64>>, PhaseReport)> {
    chain.check()?;
    let weights = ConditionedWeights::new(chain, s);
    let missing = (0..chain.num_states()).any(|x| weights.reachable[x] && a[x].is_none());
    let a: Vec<f64> = if missing {
        let (raw, _) = iterate_mean(chain, &weights, config);
        a.iter().zip(raw).map(|(v, r)| v.unwrap_or(r)).collect()
    } else {
        a.iter().map(|v| v.unwrap_or(0.0)).collect()
    };
    let (b, report) = iterate_second_moment(chain, &weights, &a, config);
    Ok((weights.mask(b), report))
}

/// `D(x) = sqrt(max(0, B(x) - A(x)²))` wherever both moments are defined.
pub fn std_dev(a: &[Option<f64>], b: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(state, pair)| match pair {
            (Some(a), Some(b)) => {
                let radicand = b - a * a;
                if radicand < -VARIANCE_SLACK {
                    Err(Error::NegativeVariance { state, radicand })
                } else {
                    Ok(Some(radicand.max(0.0).sqrt()))
                }
            }
            _ => Ok(None),
        })
        .collect()
}

/// Runs the success, mean and second-moment phases in order, then `D`.
pub fn solve_all(chain: &Chain, config: &SolveConfig) -> Result<SolveResult> {
    let (s, success) = solve_success(chain, config)?;
    let weights = ConditionedWeights::new(chain, &s);
    let (a, mean) = iterate_mean(chain, &weights, config);
    let (b, second_moment) = iterate_second_moment(chain, &weights, &a, config);
    let a = weights.mask(a);
    let b = weights.mask(b);
    let d = std_dev(&a, &b)?;
    Ok(SolveResult {
        s,
        a,
        b,
        d,
        success,
        mean,
        second_moment,
    })
}

fn iterate_mean(
    chain: &Chain,
    weights: &ConditionedWeights,
    config: &SolveConfig,
) -> (Vec<f64>, PhaseReport) {
    jacobi(
        vec![0.0; chain.num_states()],
        &weights.active,
        config,
        |x, a| weights.apply(chain, x, |y, tau| a[y] + tau),
    )
}

fn iterate_second_moment(
    chain: &Chain,
    weights: &ConditionedWeights,
    a: &[f64],
    config: &SolveConfig,
) -> (Vec<f64>, PhaseReport) {
    jacobi(
        vec![0.0; chain.num_states()],
        &weights.active,
        config,
        |x, b| weights.apply(chain, x, |y, tau| b[y] + 2.0 * tau * a[y] + tau * tau),
    )
}

/// Edge coefficients `p(x,y) s(y)` with the `1/s(x)` normalizer.
///
/// The moments are iterated on every state with a (normal) positive `s`, and
/// only reported above [`S_FLOOR`].
struct ConditionedWeights {
    coeff: Vec<f64>,
    inv_s: Vec<f64>,
    reachable: Vec<bool>,
    reported: Vec<bool>,
    active: Vec<StateId>,
}

impl ConditionedWeights {
    fn new(chain: &Chain, s: &[f64]) -> Self {
        let n = chain.num_states();
        let reachable: Vec<bool> = s.iter().map(|&v| v >= f64::MIN_POSITIVE).collect();
        let reported = s.iter().map(|&v| v > S_FLOOR).collect();
        let coeff = chain
            .edges()
            .iter()
            .map(|e| {
                if reachable[e.to] {
                    e.prob * s[e.to]
                } else {
                    0.0
                }
            })
            .collect();
        let inv_s = s.iter().map(|&v| 1.0 / v).collect();
        let active = (0..n)
            .filter(|&x| reachable[x] && !chain.is_terminal(x))
            .collect();
        Self {
            coeff,
            inv_s,
            reachable,
            reported,
            active,
        }
    }

    fn apply(&self, chain: &Chain, x: StateId, term: impl Fn(StateId, f64) -> f64) -> f64 {
        let range = chain.row_range(x);
        let sum: f64 = chain.edges()[range.clone()]
            .iter()
            .zip(&self.coeff[range])
            .filter(|(e, _)| self.reachable[e.to])
            .map(|(e, &c)| c * term(e.to, f64::from(e.time)))
            .sum();
        sum * self.inv_s[x]
    }

    fn mask(&self, values: Vec<f64>) -> Vec<Option<f64>> {
        values
            .into_iter()
            .zip(&self.reported)
            .map(|(v, &ok)| ok.then_some(v))
            .collect()
    }
}

/// Relative sweep changes at this level are floating-point noise.
const ROUNDOFF: f64 = 16.0 * f64::EPSILON;

/// The change has reached the tolerance and so has the remaining error,
/// estimated as `r ρ / (1 - ρ)` with `ρ` the observed contraction ratio.
/// Slowly contracting sweeps (long loops) need the second test: a change of
/// `r` per sweep at `ρ = 0.9` still leaves about `9 r` to go.
fn settled(residual: f64, previous: f64, tolerance: f64) -> bool {
    if residual <= ROUNDOFF {
        return true;
    }
    let ratio = residual / previous;
    residual <= tolerance && ratio < 1.0 && residual * ratio / (1.0 - ratio) <= tolerance
}

fn jacobi(
    mut current: Vec<f64>,
    active: &[StateId],
    config: &SolveConfig,
    update: impl Fn(StateId, &[f64]) -> f64,
) -> (Vec<f64>, PhaseReport) {
    let mut next = current.clone();
    let mut iterations = 0;
    let mut residual = 0.0;
    let limit = config.sweep_limit();

    while iterations < limit && !active.is_empty() {
        let previous = if iterations == 0 {
            f64::INFINITY
        } else {
            residual
        };
        residual = 0.0f64;
        for &x in active {
            let value = update(x, &current);
            let change = (value - current[x]).abs();
            let scaled = if value == 0.0 {
                change
            } else {
                change / value.abs()
            };
            residual = residual.max(scaled);
            next[x] = value;
        }
        std::mem::swap(&mut current, &mut next);
        iterations += 1;
        if residual == 0.0
            || (config.fixed_iterations.is_none() && settled(residual, previous, config.tolerance))
        {
            break;
        }
    }

    let converged = residual <= config.tolerance;
    (
        current,
        PhaseReport {
            iterations,
            residual,
            converged,
        },
    )
}
