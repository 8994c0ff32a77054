//! Markov reward processes: definition, validation, exact values and sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MrpError, Result};
use crate::linalg;

/// Tolerance used when checking that probabilities sum to one.
pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the number of states in one sampled path.
pub const DEFAULT_MAX_PATH_LEN: usize = 1_000_000;

static ZERO_REWARD: RewardModel = RewardModel::Deterministic(0.0);

/// Reward attached to one edge.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardModel {
    Deterministic(f64),
    /// Finite support as `(value, probability)` pairs.
    Discrete(Vec<(f64, f64)>),
}

impl RewardModel {
    pub fn mean(&self) -> f64 {
        match self {
            RewardModel::Deterministic(v) => *v,
            RewardModel::Discrete(support) => support.iter().map(|(v, p)| v * p).sum(),
        }
    }

    pub fn num_outcomes(&self) -> usize {
        match self {
            RewardModel::Deterministic(_) => 1,
            RewardModel::Discrete(support) => support.len(),
        }
    }

    pub fn outcome_value(&self, k: usize) -> Option<f64> {
        match self {
            RewardModel::Deterministic(v) => (k == 0).then_some(*v),
            RewardModel::Discrete(support) => support.get(k).map(|(v, _)| *v),
        }
    }

    /// Index of the support point equal to `value`.
    pub fn outcome_index(&self, value: f64) -> Option<usize> {
        match self {
            RewardModel::Deterministic(v) => (*v == value).then_some(0),
            RewardModel::Discrete(support) => support.iter().position(|(v, _)| *v == value),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.num_outcomes() == 1
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RewardModel::Deterministic(v) => *v,
            RewardModel::Discrete(support) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, p) in support {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                support.last().map(|(v, _)| *v).unwrap_or(0.0)
            }
        }
    }
}

/// One violated invariant of an [`MrpSpec`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoStates,
    Dimension { field: &'static str, expected: usize, found: usize },
    NonFinite { field: &'static str },
    NegativeStartProb { state: usize },
    StartSum { sum: f64 },
    TransitionRange { from: usize, to: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    TerminalRow { row: usize },
    RewardEdge { from: usize, to: usize },
    RewardSupport { from: usize, to: usize, reason: String },
    Discount { gamma: f64 },
    NoAbsorption { state: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "num_states must be positive"),
            Violation::Dimension { field, expected, found } => {
                write!(f, "{field}: expected length {expected}, found {found}")
            }
            Violation::NonFinite { field } => write!(f, "{field}: non-finite entry"),
            Violation::NegativeStartProb { state } => {
                write!(f, "start_probs[{state}] is negative")
            }
            Violation::StartSum { sum } => write!(f, "start_probs sum to {sum}, expected 1"),
            Violation::TransitionRange { from, to, value } => {
                write!(f, "transition {from}->{to} has probability {value} outside [0,1]")
            }
            Violation::RowSum { row, sum } => {
                write!(f, "transition row {row} sums to {sum}, expected 1")
            }
            Violation::TerminalRow { row } => {
                write!(f, "terminal state {row} has outgoing transitions")
            }
            Violation::RewardEdge { from, to } => {
                write!(f, "reward for {from}->{to} references a state out of range")
            }
            Violation::RewardSupport { from, to, reason } => {
                write!(f, "reward for {from}->{to}: {reason}")
            }
            Violation::Discount { gamma } => write!(f, "gamma {gamma} outside (0,1]"),
            Violation::NoAbsorption { state } => {
                write!(f, "state {state} is reachable but cannot reach a terminal state")
            }
        }
    }
}

/// A finite Markov reward process with explicit terminal states.
///
/// Terminal rows are all-zero. Edges without an entry in `rewards` pay 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MrpSpec {
    pub num_states: usize,
    pub start_probs: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
    pub rewards: BTreeMap<(usize, usize), RewardModel>,
    pub gamma: f64,
    pub terminal: Vec<bool>,
}

impl MrpSpec {
    pub fn reward(&self, from: usize, to: usize) -> &RewardModel {
        self.rewards.get(&(from, to)).unwrap_or(&ZERO_REWARD)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Positive-probability successors of `state`.
    pub fn successors(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions[state]
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(j, _)| j)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.num_states && to < self.num_states && self.transitions[from][to] > 0.0
    }

    /// Expected one-step reward `r_i = sum_j p_ij E[R_ij]`.
    pub fn expected_rewards(&self) -> Vec<f64> {
        (0..self.num_states)
            .map(|i| self.successors(i).map(|j| self.transitions[i][j] * self.reward(i, j).mean()).sum())
            .collect()
    }

    /// States reachable from a positive-probability start.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states];
        let mut stack: Vec<usize> =
            (0..self.num_states).filter(|&i| self.start_probs[i] > 0.0).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(u) = stack.pop() {
            for v in self.successors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Empty report iff every invariant holds.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.num_states;
        let mut report = Vec::new();
        if n == 0 {
            report.push(Violation::NoStates);
            return report;
        }
        let mut shape_ok = true;
        let mut dim = |field, found: usize, report: &mut Vec<Violation>| {
            if found != n {
                report.push(Violation::Dimension { field, expected: n, found });
                shape_ok = false;
            }
        };
        dim("start_probs", self.start_probs.len(), &mut report);
        dim("terminal", self.terminal.len(), &mut report);
        dim("transitions", self.transitions.len(), &mut report);
        for row in &self.transitions {
            dim("transitions row", row.len(), &mut report);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            report.push(Violation::Discount { gamma: self.gamma });
        }
        if !shape_ok {
            return report;
        }

        if self.start_probs.iter().any(|p| !p.is_finite()) {
            report.push(Violation::NonFinite { field: "start_probs" });
        }
        for (i, p) in self.start_probs.iter().enumerate() {
            if *p < 0.0 {
                report.push(Violation::NegativeStartProb { state: i });
            }
        }
        let sum: f64 = self.start_probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            report.push(Violation::StartSum { sum });
        }

        for (i, row) in self.transitions.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(p) {
                    report.push(Violation::TransitionRange { from: i, to: j, value: *p });
                }
            }
            let sum: f64 = row.iter().sum();
            if self.terminal[i] {
                if row.iter().any(|p| *p != 0.0) {
                    report.push(Violation::TerminalRow { row: i });
                }
            } else if !((sum - 1.0).abs() <= PROB_TOL) {
                report.push(Violation::RowSum { row: i, sum });
            }
        }

        for (&(i, j), model) in &self.rewards {
            if i >= n || j >= n {
                report.push(Violation::RewardEdge { from: i, to: j });
                continue;
            }
            let bad = |reason: &str| Violation::RewardSupport { from: i, to: j, reason: reason.into() };
            match model {
                RewardModel::Deterministic(v) => {
                    if !v.is_finite() {
                        report.push(bad("non-finite value"));
                    }
                }
                RewardModel::Discrete(support) => {
                    if support.is_empty() {
                        report.push(bad("empty support"));
                        continue;
                    }
                    if support.iter().any(|(v, p)| !v.is_finite() || !(*p >= 0.0)) {
                        report.push(bad("non-finite value or negative probability"));
                    }
                    let total: f64 = support.iter().map(|(_, p)| p).sum();
                    if (total - 1.0).abs() > PROB_TOL {
                        report.push(bad(&format!("probabilities sum to {total}")));
                    }
                    for (a, (va, _)) in support.iter().enumerate() {
                        if support[..a].iter().any(|(vb, _)| vb == va) {
                            report.push(bad("duplicate support value"));
                            break;
                        }
                    }
                }
            }
        }

        if self.gamma == 1.0 && report.is_empty() {
            let reachable = self.reachable();
            let absorbing = self.can_reach_terminal();
            for s in 0..n {
                if reachable[s] && !absorbing[s] {
                    report.push(Violation::NoAbsorption { state: s });
                }
            }
        }
        report
    }

    pub fn check(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(MrpError::Validation(report))
        }
    }

    /// States from which some terminal state is reachable.
    fn can_reach_terminal(&self) -> Vec<bool> {
        let n = self.num_states;
        let mut preds = vec![Vec::new(); n];
        for i in 0..n {
            for j in self.successors(i) {
                preds[j].push(i);
            }
        }
        let mut ok = self.terminal.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&i| ok[i]).collect();
        while let Some(v) = stack.pop() {
            for &u in &preds[v] {
                if !ok[u] {
                    ok[u] = true;
                    stack.push(u);
                }
            }
        }
        ok
    }

    /// Solves `(I - gamma P) V = r`.
    pub fn exact_value(&self) -> Result<Vec<f64>> {
        self.check()?;
        let n = self.num_states;
        let p = DMatrix::from_fn(n, n, |i, j| self.transitions[i][j]);
        let a = DMatrix::identity(n, n) - p * self.gamma;
        let b = DVector::from_vec(self.expected_rewards());
        linalg::solve_checked(&a, &b)
            .map(|v| v.iter().copied().collect())
            .ok_or(MrpError::SingularSystem)
    }

    /// True iff no cycle is reachable from a positive-probability start.
    pub fn is_acyclic(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let n = self.num_states;
        let mut mark = vec![Mark::New; n];
        for root in (0..n).filter(|&i| self.start_probs[i] > 0.0) {
            if mark[root] != Mark::New {
                continue;
            }
            // iterative DFS holding (state, next successor index)
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Open;
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                let row = &self.transitions[u];
                while *next < n && row[*next] <= 0.0 {
                    *next += 1;
                }
                if *next == n {
                    mark[u] = Mark::Done;
                    stack.pop();
                    continue;
                }
                let v = *next;
                *next += 1;
                match mark[v] {
                    Mark::Open => return false,
                    Mark::New => {
                        mark[v] = Mark::Open;
                        stack.push((v, 0));
                    }
                    Mark::Done => {}
                }
            }
        }
        true
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MrpFile = serde_json::from_str(text)?;
        let spec = file.into_spec()?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MrpFile::from_spec(self)).expect("MRP serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// A sampled trajectory ending in a terminal state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub states: Vec<usize>,
    /// `rewards[t]` is paid on the transition `states[t] -> states[t + 1]`.
    pub rewards: Vec<f64>,
}

impl PathSample {
    pub fn new(states: Vec<usize>, rewards: Vec<f64>) -> Self {
        Self { states, rewards }
    }

    /// Builds a path whose edges all carry deterministic rewards.
    pub fn deterministic(spec: &MrpSpec, states: &[usize]) -> Result<Self> {
        let mut rewards = Vec::with_capacity(states.len().saturating_sub(1));
        for w in states.windows(2) {
            match spec.reward(w[0], w[1]) {
                RewardModel::Deterministic(v) => rewards.push(*v),
                RewardModel::Discrete(_) => {
                    return Err(MrpError::InvalidPath(format!(
                        "edge {}->{} has a stochastic reward",
                        w[0], w[1]
                    )))
                }
            }
        }
        let path = Self::new(states.to_vec(), rewards);
        path.check(spec)?;
        Ok(path)
    }

    /// Number of states in the path.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.states.windows(2).zip(&self.rewards).map(|(w, r)| (w[0], w[1], *r))
    }

    pub fn check(&self, spec: &MrpSpec) -> Result<()> {
        let bad = |msg: String| Err(MrpError::InvalidPath(msg));
        if self.states.is_empty() {
            return bad("no states".into());
        }
        if self.rewards.len() + 1 != self.states.len() {
            return bad(format!(
                "{} states need {} rewards, found {}",
                self.states.len(),
                self.states.len() - 1,
                self.rewards.len()
            ));
        }
        if let Some(&s) = self.states.iter().find(|&&s| s >= spec.num_states) {
            return bad(format!("state {s} out of range"));
        }
        let last = self.states.len() - 1;
        for (t, &s) in self.states.iter().enumerate() {
            if spec.terminal[s] != (t == last) {
                return bad(if t == last {
                    format!("path ends in non-terminal state {s}")
                } else {
                    format!("terminal state {s} at position {t}")
                });
            }
        }
        for (i, j, r) in self.transitions() {
            if !spec.has_edge(i, j) {
                return bad(format!("edge {i}->{j} has zero probability"));
            }
            if spec.reward(i, j).outcome_index(r).is_none() {
                return bad(format!("reward {r} outside the support of edge {i}->{j}"));
            }
        }
        Ok(())
    }
}

struct Edge<'a> {
    to: usize,
    cum: f64,
    reward: &'a RewardModel,
}

/// Precomputed sampler for repeated path draws from one MRP.
pub struct PathSampler<'a> {
    starts: Vec<(usize, f64)>,
    rows: Vec<Vec<Edge<'a>>>,
    terminal: &'a [bool],
    max_len: usize,
}

impl<'a> PathSampler<'a> {
    pub fn new(spec: &'a MrpSpec) -> Self {
        let mut acc = 0.0;
        let starts = (0..spec.num_states)
            .filter(|&i| spec.start_probs[i] > 0.0)
            .map(|i| {
                acc += spec.start_probs[i];
                (i, acc)
            })
            .collect();
        let rows = (0..spec.num_states)
            .map(|i| {
                let mut acc = 0.0;
                spec.successors(i)
                    .map(|j| {
                        acc += spec.transitions[i][j];
                        Edge { to: j, cum: acc, reward: spec.reward(i, j) }
                    })
                    .collect()
            })
            .collect();
        Self { starts, rows, terminal: &spec.terminal, max_len: DEFAULT_MAX_PATH_LEN }
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathSample> {
        let u: f64 = rng.gen();
        let state = self
            .starts
            .iter()
            .find(|(_, c)| u < *c)
            .or(self.starts.last())
            .map(|(s, _)| *s)
            .ok_or_else(|| MrpError::InvalidArgument("no start state".into()))?;
        self.sample_from(state, rng)
    }

    /// Draws a path that starts in `start` regardless of the start distribution.
    pub fn sample_from<R: Rng + ?Sized>(&self, start: usize, rng: &mut R) -> Result<PathSample> {
        if start >= self.rows.len() {
            return Err(MrpError::InvalidArgument(format!("start state {start} out of range")));
        }
        let mut state = start;
        let mut states = vec![state];
        let mut rewards = Vec::new();
        while !self.terminal[state] {
            if states.len() >= self.max_len {
                return Err(MrpError::PathLengthExceeded(self.max_len));
            }
            let row = &self.rows[state];
            let u: f64 = rng.gen();
            let edge = row
                .iter()
                .find(|e| u < e.cum)
                .or(row.last())
                .ok_or_else(|| MrpError::InvalidPath(format!("state {state} has no successors")))?;
            rewards.push(edge.reward.sample(rng));
            state = edge.to;
            states.push(state);
        }
        Ok(PathSample { states, rewards })
    }

    pub fn sample_many<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<PathSample>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Draws one path. Prefer [`PathSampler`] for repeated draws.
pub fn sample_path<R: Rng + ?Sized>(spec: &MrpSpec, rng: &mut R) -> Result<PathSample> {
    PathSampler::new(spec).sample(rng)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Transitions {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct RewardEntry {
    from: usize,
    to: usize,
    kind: RewardKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<Vec<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RewardKind {
    Det,
    Discrete,
}

#[derive(Serialize, Deserialize)]
struct MrpFile {
    num_states: usize,
    start_probs: Vec<f64>,
    transitions: Transitions,
    #[serde(default)]
    rewards: Vec<RewardEntry>,
    gamma: f64,
    terminal: Vec<bool>,
}

impl MrpFile {
    fn from_spec(spec: &MrpSpec) -> Self {
        let rewards = spec
            .rewards
            .iter()
            .map(|(&(from, to), model)| match model {
                RewardModel::Deterministic(v) => {
                    RewardEntry { from, to, kind: RewardKind::Det, value: Some(*v), support: None }
                }
                RewardModel::Discrete(s) => RewardEntry {
                    from,
                    to,
                    kind: RewardKind::Discrete,
                    value: None,
                    support: Some(s.clone()),
                },
            })
            .collect();
        MrpFile {
            num_states: spec.num_states,
            start_probs: spec.start_probs.clone(),
            transitions: Transitions::Rows(spec.transitions.clone()),
            rewards,
            gamma: spec.gamma,
            terminal: spec.terminal.clone(),
        }
    }

    fn into_spec(self) -> Result<MrpSpec> {
        let n = self.num_states;
        let transitions = match self.transitions {
            Transitions::Rows(rows) => rows,
            Transitions::Flat(flat) => {
                if flat.len() != n * n {
                    return Err(MrpError::Validation(vec![Violation::Dimension {
                        field: "transitions",
                        expected: n * n,
                        found: flat.len(),
                    }]));
                }
                flat.chunks(n.max(1)).map(|c| c.to_vec()).collect()
            }
        };
        let mut rewards = BTreeMap::new();
        for e in self.rewards {
            let model = match (e.kind, e.value, e.support) {
                (RewardKind::Det, Some(v), None) => RewardModel::Deterministic(v),
                (RewardKind::Discrete, None, Some(s)) => RewardModel::Discrete(s),
                _ => {
                    return Err(MrpError::Validation(vec![Violation::RewardSupport {
                        from: e.from,
                        to: e.to,
                        reason: "\"det\" needs `value`, \"discrete\" needs `support`".into(),
                    }]))
                }
            };
            if rewards.insert((e.from, e.to), model).is_some() {
                return Err(MrpError::Validation(vec![Violation::RewardSupport {
                    from: e.from,
                    to: e.to,
                    reason: "declared twice".into(),
                }]));
            }
        }
        Ok(MrpSpec {
            num_states: n,
            start_probs: self.start_probs,
            transitions,
            rewards,
            gamma: self.gamma,
            terminal: self.terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn row_sum_violation_names_row() {
        let mut spec = catalog::two_state(0.5, 0.5, catalog::TwoStateReward::Cycle);
        spec.transitions[0] = vec![0.4, 0.5];
        let report = spec.validate();
        assert!(report.contains(&Violation::RowSum { row: 0, sum: 0.9 }), "{report:?}");
    }

    #[test]
    fn absorbing_self_loop_is_reported_at_unit_discount() {
        let spec = MrpSpec {
            num_states: 2,
            start_probs: vec![1.0, 0.0],
            transitions: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            rewards: BTreeMap::new(),
            gamma: 1.0,
            terminal: vec![false, true],
        };
        assert_eq!(spec.validate(), vec![Violation::NoAbsorption { state: 0 }]);
        assert!(spec.clone().with_gamma(0.9).validate().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let spec = catalog::fork_a([1.0, 0.0]);
        let back = MrpSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn flat_transitions_are_accepted() {
        let text = r#"{"num_states":2,"start_probs":[1,0],"transitions":[0,1,0,0],
            "rewards":[{"from":0,"to":1,"kind":"det","value":2.5}],"gamma":1,"terminal":[false,true]}"#;
        let spec = MrpSpec::from_json(text).unwrap();
        assert_eq!(spec.exact_value().unwrap(), vec![2.5, 0.0]);
    }

    #[test]
    fn sampler_respects_length_guard() {
        let spec = catalog::two_state(0.999, 0.5, catalog::TwoStateReward::Cycle);
        let sampler = PathSampler::new(&spec).with_max_len(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = (0..50).find_map(|_| sampler.sample(&mut rng).err()).unwrap();
        assert!(matches!(err, MrpError::PathLengthExceeded(3)));
    }

    #[test]
    fn deterministic_chain_path() {
        let spec = catalog::chain(&[1.0, 2.0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = sample_path(&spec, &mut rng).unwrap();
        assert_eq!(path.states, vec![0, 1, 2]);
        assert_eq!(path.rewards, vec![1.0, 2.0]);
    }
}
