//! Episodic MDP model, fixed policy, and the policy-induced Markov chain.
//!
//! Terminal states carry no outgoing edges in a [`Chain`]; the absorbing sink
//! that follows every terminal is never materialized.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

pub type StateId = usize;

/// Transition times keyed by `(from, to)`.
pub type EdgeTimes = BTreeMap<(StateId, StateId), u32>;

/// Row sums must match 1 within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Induced edges with less probability than this are dropped.
pub const DROP_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Transient,
    Goal,
    Fail,
}

impl StateKind {
    pub fn is_terminal(self) -> bool {
        self != StateKind::Transient
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: StateId,
    pub action: usize,
    pub to: StateId,
    pub prob: f64,
}

/// Full model: `P(x, a, y)` plus goal and fail terminal sets.
#[derive(Debug, Clone)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Transition>,
    goal_states: BTreeSet<StateId>,
    fail_states: BTreeSet<StateId>,
}

impl Mdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<Transition>,
        goal_states: impl IntoIterator<Item = StateId>,
        fail_states: impl IntoIterator<Item = StateId>,
    ) -> Result<Self> {
        let goal_states: BTreeSet<_> = goal_states.into_iter().collect();
        let fail_states: BTreeSet<_> = fail_states.into_iter().collect();
        for &s in goal_states.iter().chain(&fail_states) {
            check_state(s, num_states)?;
        }
        if let Some(&s) = goal_states.intersection(&fail_states).next() {
            return Err(Error::GoalFailOverlap(s));
        }

        let mut sums: BTreeMap<(StateId, usize), f64> = BTreeMap::new();
        for t in &transitions {
            check_state(t.from, num_states)?;
            check_state(t.to, num_states)?;
            if t.action >= num_actions {
                return Err(Error::ActionOutOfRange {
                    action: t.action,
                    num_actions,
                });
            }
            check_probability(t.prob, || format!("P({}, {}, {})", t.from, t.action, t.to))?;
            *sums.entry((t.from, t.action)).or_default() += t.prob;
        }
        for (&(state, action), &sum) in &sums {
            let terminal = goal_states.contains(&state) || fail_states.contains(&state);
            if !terminal && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::TransitionRowSum { state, action, sum });
            }
        }

        Ok(Self {
            num_states,
            num_actions,
            transitions,
            goal_states,
            fail_states,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn goal_states(&self) -> &BTreeSet<StateId> {
        &self.goal_states
    }

    pub fn fail_states(&self) -> &BTreeSet<StateId> {
        &self.fail_states
    }

    pub fn is_terminal(&self, state: StateId) -> bool {
        self.goal_states.contains(&state) || self.fail_states.contains(&state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEntry {
    pub state: StateId,
    pub action: usize,
    pub weight: f64,
}

/// Stochastic policy `π(x, a)` as a sparse list of weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Policy {
    pub entries: Vec<PolicyEntry>,
}

impl Policy {
    pub fn new(entries: Vec<PolicyEntry>) -> Self {
        Self { entries }
    }

    /// Deterministic policy choosing `actions[x]` in state `x`.
    pub fn deterministic(actions: &[usize]) -> Self {
        let entries = actions
            .iter()
            .enumerate()
            .map(|(state, &action)| PolicyEntry {
                state,
                action,
                weight: 1.0,
            })
            .collect();
        Self { entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: StateId,
    pub to: StateId,
    pub prob: f64,
    pub time: u32,
}

impl Edge {
    pub fn new(from: StateId, to: StateId, prob: f64, time: u32) -> Self {
        Self {
            from,
            to,
            prob,
            time,
        }
    }
}

/// Markov chain with integer transition times, the solver's working form.
///
/// Edges are kept sorted by `(from, to)` with a row index over them. The
/// constructor does not enforce the chain invariants; run
/// [`validate_chain`] (or [`Chain::check`]) before solving.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    num_states: usize,
    edges: Vec<Edge>,
    row_start: Vec<usize>,
    kinds: Vec<StateKind>,
    goal_states: Vec<StateId>,
    fail_states: Vec<StateId>,
}

impl Chain {
    pub fn new(
        num_states: usize,
        mut edges: Vec<Edge>,
        goal_states: impl IntoIterator<Item = StateId>,
        fail_states: impl IntoIterator<Item = StateId>,
    ) -> Self {
        edges.sort_by_key(|e| (e.from, e.to));
        let mut goal_states: Vec<_> = goal_states.into_iter().collect();
        let mut fail_states: Vec<_> = fail_states.into_iter().collect();
        goal_states.sort_unstable();
        goal_states.dedup();
        fail_states.sort_unstable();
        fail_states.dedup();

        let mut kinds = vec![StateKind::Transient; num_states];
        for &s in &fail_states {
            if let Some(k) = kinds.get_mut(s) {
                *k = StateKind::Fail;
            }
        }
        for &s in &goal_states {
            if let Some(k) = kinds.get_mut(s) {
                *k = StateKind::Goal;
            }
        }

        let mut row_start = vec![0usize; num_states + 1];
        for e in &edges {
            if e.from < num_states {
                row_start[e.from + 1] += 1;
            }
        }
        for i in 0..num_states {
            row_start[i + 1] += row_start[i];
        }

        Self {
            num_states,
            edges,
            row_start,
            kinds,
            goal_states,
            fail_states,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Outgoing edges of `state`, sorted by target.
    pub fn row(&self, state: StateId) -> &[Edge] {
        &self.edges[self.row_range(state)]
    }

    /// Position of `state`'s row within [`Chain::edges`].
    pub fn row_range(&self, state: StateId) -> std::ops::Range<usize> {
        self.row_start[state]..self.row_start[state + 1]
    }

    pub fn kind(&self, state: StateId) -> StateKind {
        self.kinds[state]
    }

    pub fn is_terminal(&self, state: StateId) -> bool {
        self.kinds[state].is_terminal()
    }

    pub fn goal_states(&self) -> &[StateId] {
        &self.goal_states
    }

    pub fn fail_states(&self) -> &[StateId] {
        &self.fail_states
    }

    pub fn max_time(&self) -> u32 {
        self.edges.iter().map(|e| e.time).max().unwrap_or(0)
    }

    /// Errors with every fatal diagnostic; warnings are ignored.
    pub fn check(&self) -> Result<()> {
        let fatal: Vec<_> = validate_chain(self)
            .into_iter()
            .filter(Diagnostic::is_fatal)
            .collect();
        if fatal.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidChain(fatal))
        }
    }

    /// Relabels states so that old state `x` becomes `perm[x]`.
    pub fn permuted(&self, perm: &[StateId]) -> Chain {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(perm[e.from], perm[e.to], e.prob, e.time))
            .collect();
        Chain::new(
            self.num_states,
            edges,
            self.goal_states.iter().map(|&s| perm[s]),
            self.fail_states.iter().map(|&s| perm[s]),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    StateOutOfRange {
        context: &'static str,
        state: StateId,
    },
    GoalFailOverlap {
        state: StateId,
    },
    BadProbability {
        from: StateId,
        to: StateId,
        prob: f64,
    },
    NonPositiveTime {
        from: StateId,
        to: StateId,
    },
    DuplicateEdge {
        from: StateId,
        to: StateId,
    },
    TerminalWithEdges {
        state: StateId,
        count: usize,
    },
    RowSumDefect {
        state: StateId,
        defect: f64,
    },
    /// Non-fatal: no terminal state is reachable from `state`.
    AbsorptionNotGuaranteed {
        state: StateId,
    },
}

impl Diagnostic {
    pub fn is_fatal(&self) -> bool {
        !matches!(self, Diagnostic::AbsorptionNotGuaranteed { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::StateOutOfRange { context, state } => {
                write!(f, "{context} state {state} out of range")
            }
            Diagnostic::GoalFailOverlap { state } => {
                write!(f, "state {state} is both goal and fail")
            }
            Diagnostic::BadProbability { from, to, prob } => {
                write!(
                    f,
                    "edge {from} -> {to} has probability {prob} outside (0, 1]"
                )
            }
            Diagnostic::NonPositiveTime { from, to } => {
                write!(f, "edge {from} -> {to} has time 0")
            }
            Diagnostic::DuplicateEdge { from, to } => {
                write!(f, "duplicate edge {from} -> {to}")
            }
            Diagnostic::TerminalWithEdges { state, count } => {
                write!(f, "terminal state {state} has {count} outgoing edges")
            }
            Diagnostic::RowSumDefect { state, defect } => {
                let rounded = (defect * 1e12).round() / 1e12;
                write!(f, "row-sum defect {rounded} at state {state}")
            }
            Diagnostic::AbsorptionNotGuaranteed { state } => {
                write!(
                    f,
                    "absorption not guaranteed: no terminal reachable from state {state}"
                )
            }
        }
    }
}

/// Checks every chain invariant; an empty list means the chain is valid.
pub fn validate_chain(chain: &Chain) -> Vec<Diagnostic> {
    let n = chain.num_states;
    let mut diags = Vec::new();

    for &s in &chain.goal_states {
        if s >= n {
            diags.push(Diagnostic::StateOutOfRange {
                context: "goal",
                state: s,
            });
        }
    }
    for &s in &chain.fail_states {
        if s >= n {
            diags.push(Diagnostic::StateOutOfRange {
                context: "fail",
                state: s,
            });
        } else if chain.goal_states.binary_search(&s).is_ok() {
            diags.push(Diagnostic::GoalFailOverlap { state: s });
        }
    }

    let mut previous: Option<(StateId, StateId)> = None;
    for e in &chain.edges {
        if e.from >= n {
            diags.push(Diagnostic::StateOutOfRange {
                context: "edge source",
                state: e.from,
            });
            continue;
        }
        if e.to >= n {
            diags.push(Diagnostic::StateOutOfRange {
                context: "edge target",
                state: e.to,
            });
        }
        if !(e.prob > 0.0 && e.prob <= 1.0) {
            diags.push(Diagnostic::BadProbability {
                from: e.from,
                to: e.to,
                prob: e.prob,
            });
        }
        if e.time == 0 {
            diags.push(Diagnostic::NonPositiveTime {
                from: e.from,
                to: e.to,
            });
        }
        if previous == Some((e.from, e.to)) {
            diags.push(Diagnostic::DuplicateEdge {
                from: e.from,
                to: e.to,
            });
        }
        previous = Some((e.from, e.to));
    }

    for x in 0..n {
        let row = chain.row(x);
        if chain.is_terminal(x) {
            if !row.is_empty() {
                diags.push(Diagnostic::TerminalWithEdges {
                    state: x,
                    count: row.len(),
                });
            }
            continue;
        }
        let sum: f64 = row.iter().map(|e| e.prob).sum();
        let defect = 1.0 - sum;
        if defect.abs() > ROW_SUM_TOLERANCE {
            diags.push(Diagnostic::RowSumDefect { state: x, defect });
        }
    }

    let reaches_terminal = terminal_reachability(chain);
    for (x, &ok) in reaches_terminal.iter().enumerate() {
        if !ok {
            diags.push(Diagnostic::AbsorptionNotGuaranteed { state: x });
        }
    }
    diags
}

/// Backward breadth-first search from the terminal set.
fn terminal_reachability(chain: &Chain) -> Vec<bool> {
    let n = chain.num_states;
    let mut predecessors: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for e in &chain.edges {
        if e.from < n && e.to < n && e.prob > 0.0 {
            predecessors[e.to].push(e.from);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for x in (0..n).filter(|&x| chain.is_terminal(x)) {
        seen[x] = true;
        queue.push_back(x);
    }
    while let Some(y) = queue.pop_front() {
        for &x in &predecessors[y] {
            if !seen[x] {
                seen[x] = true;
                queue.push_back(x);
            }
        }
    }
    seen
}

/// Averages the MDP kernel over the policy: `p(x, y) = Σ_a π(x, a) P(x, a, y)`.
///
/// Policy rows at terminal states are ignored and terminals get no edges.
pub fn induce_chain(mdp: &Mdp, policy: &Policy, times: &EdgeTimes) -> Result<Chain> {
    let n = mdp.num_states;

    let mut weights: BTreeMap<(StateId, usize), f64> = BTreeMap::new();
    for entry in &policy.entries {
        check_state(entry.state, n)?;
        if entry.action >= mdp.num_actions {
            return Err(Error::ActionOutOfRange {
                action: entry.action,
                num_actions: mdp.num_actions,
            });
        }
        check_probability(entry.weight, || {
            format!("π({}, {})", entry.state, entry.action)
        })?;
        *weights.entry((entry.state, entry.action)).or_default() += entry.weight;
    }

    let mut kernel: BTreeMap<(StateId, usize), Vec<(StateId, f64)>> = BTreeMap::new();
    for t in &mdp.transitions {
        kernel
            .entry((t.from, t.action))
            .or_default()
            .push((t.to, t.prob));
    }

    let mut row_weight = vec![0.0; n];
    for (&(state, _), &w) in &weights {
        row_weight[state] += w;
    }

    let mut edges = Vec::new();
    for x in (0..n).filter(|&x| !mdp.is_terminal(x)) {
        if (row_weight[x] - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::PolicyRowSum {
                state: x,
                sum: row_weight[x],
            });
        }

        let mut row: BTreeMap<StateId, f64> = BTreeMap::new();
        for (&(_, action), &w) in weights.range((x, 0)..(x + 1, 0)) {
            if w == 0.0 {
                continue;
            }
            let outcomes = kernel
                .get(&(x, action))
                .ok_or(Error::UndefinedAction { state: x, action })?;
            for &(y, p) in outcomes {
                *row.entry(y).or_default() += w * p;
            }
        }

        row.retain(|_, p| *p >= DROP_THRESHOLD);
        let total: f64 = row.values().sum();
        for (y, p) in row {
            let time = *times
                .get(&(x, y))
                .ok_or(Error::MissingTime { from: x, to: y })?;
            if time == 0 {
                return Err(Error::ZeroTime { from: x, to: y });
            }
            edges.push(Edge::new(x, y, p / total, time));
        }
    }

    Ok(Chain::new(
        n,
        edges,
        mdp.goal_states.iter().copied(),
        mdp.fail_states.iter().copied(),
    ))
}

fn check_state(state: StateId, num_states: usize) -> Result<()> {
    if state < num_states {
        Ok(())
    } else {
        Err(Error::StateOutOfRange { state, num_states })
    }
}

fn check_probability(value: f64, context: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::BadProbability {
            value,
            context: context(),
        })
    }
}
