//! Estimators driven directly by sampled paths: Monte Carlo and TD(λ).

use crate::error::{MrpError, Result};
use crate::model::PathSample;

/// Per-state estimate with a mask of states that received at least one example.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
}

impl Estimate {
    pub fn undefined(num_states: usize) -> Self {
        Self { values: vec![0.0; num_states], defined: vec![false; num_states] }
    }

    pub fn get(&self, state: usize) -> Option<f64> {
        self.defined.get(state).copied().unwrap_or(false).then(|| self.values[state])
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }
}

/// Discounted returns from every position of a path; the terminal position has return 0.
pub fn discounted_returns(path: &PathSample, gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; path.len()];
    for t in (0..path.rewards.len()).rev() {
        g[t] = path.rewards[t] + gamma * g[t + 1];
    }
    g
}

fn monte_carlo(num_states: usize, paths: &[PathSample], gamma: f64, first_only: bool) -> Estimate {
    let mut sums = vec![0.0; num_states];
    let mut counts = vec![0u64; num_states];
    let mut seen = vec![false; num_states];
    for path in paths {
        let g = discounted_returns(path, gamma);
        seen.iter_mut().for_each(|x| *x = false);
        for (t, &s) in path.states.iter().enumerate() {
            if first_only && seen[s] {
                continue;
            }
            seen[s] = true;
            sums[s] += g[t];
            counts[s] += 1;
        }
    }
    let values = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    Estimate { values, defined: counts.iter().map(|&c| c > 0).collect() }
}

/// Average over paths of the return following the first visit of each state.
pub fn mc_first_visit(num_states: usize, paths: &[PathSample], gamma: f64) -> Estimate {
    monte_carlo(num_states, paths, gamma, true)
}

/// Average of the returns following every visit of each state.
pub fn mc_every_visit(num_states: usize, paths: &[PathSample], gamma: f64) -> Estimate {
    monte_carlo(num_states, paths, gamma, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Accumulating,
    Replacing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LearningRate {
    /// `1/k` on the state's `k`-th update.
    Harmonic,
    Constant(f64),
}

impl LearningRate {
    pub fn rate(&self, k: u64) -> f64 {
        match self {
            LearningRate::Harmonic => 1.0 / k.max(1) as f64,
            LearningRate::Constant(a) => *a,
        }
    }
}

/// When updates are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// After the episode, sweeping the path from its end, so successors are
    /// updated before the states that bootstrap from them.
    Offline,
    /// Step by step along the path with eligibility traces.
    Online,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdConfig {
    pub lambda: f64,
    pub trace: TraceKind,
    pub schedule: LearningRate,
    /// First update of a state uses rate 1; uninitialized successors pass the
    /// full return through (`lambda = 1` for that step).
    pub modified: bool,
    pub initial_value: f64,
    pub mode: UpdateMode,
}

impl Default for TdConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            trace: TraceKind::Accumulating,
            schedule: LearningRate::Harmonic,
            modified: false,
            initial_value: 0.0,
            mode: UpdateMode::Offline,
        }
    }
}

impl TdConfig {
    pub fn td_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn modified(mut self) -> Self {
        self.modified = true;
        self
    }

    pub fn with_trace(mut self, trace: TraceKind) -> Self {
        self.trace = trace;
        self
    }

    pub fn with_mode(mut self, mode: UpdateMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(MrpError::InvalidArgument(format!("lambda {} outside [0,1]", self.lambda)));
        }
        if let LearningRate::Constant(a) = self.schedule {
            if !(a > 0.0 && a <= 1.0) {
                return Err(MrpError::InvalidArgument(format!("learning rate {a} outside (0,1]")));
            }
        }
        if !self.initial_value.is_finite() {
            return Err(MrpError::InvalidArgument("non-finite initial value".into()));
        }
        Ok(())
    }
}

/// Mutable state of one TD learner.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub values: Vec<f64>,
    pub updates_seen: Vec<u64>,
    pub traces: Vec<f64>,
    pub initialized: Vec<bool>,
}

impl EstimatorState {
    pub fn new(num_states: usize, initial_value: f64) -> Self {
        Self {
            values: vec![initial_value; num_states],
            updates_seen: vec![0; num_states],
            traces: vec![0.0; num_states],
            initialized: vec![false; num_states],
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { values: self.values.clone(), defined: self.initialized.clone() }
    }
}

/// Applies one episode of TD(λ).
pub fn td_episode(state: &mut EstimatorState, path: &PathSample, cfg: &TdConfig, gamma: f64) {
    let Some(&end) = path.states.last() else { return };
    // terminal values are known
    state.values[end] = 0.0;
    state.initialized[end] = true;
    if path.len() < 2 {
        return;
    }
    match cfg.mode {
        UpdateMode::Offline => offline_episode(state, path, cfg, gamma),
        UpdateMode::Online => online_episode(state, path, cfg, gamma),
    }
}

fn offline_episode(st: &mut EstimatorState, path: &PathSample, cfg: &TdConfig, gamma: f64) {
    let states = &path.states;
    let last = states.len() - 1;
    let updates: Vec<bool> = match cfg.trace {
        TraceKind::Accumulating => vec![true; last],
        TraceKind::Replacing => {
            (0..last).map(|t| !states[..t].contains(&states[t])).collect()
        }
    };
    let mut g = 0.0;
    for t in (0..last).rev() {
        let (s, next) = (states[t], states[t + 1]);
        let ends = t + 1 == last;
        let boot = if ends { 0.0 } else { st.values[next] };
        let lambda = if cfg.modified && !ends && !st.initialized[next] { 1.0 } else { cfg.lambda };
        g = path.rewards[t] + gamma * ((1.0 - lambda) * boot + lambda * g);
        if updates[t] {
            st.updates_seen[s] += 1;
            let alpha = if cfg.modified && !st.initialized[s] {
                1.0
            } else {
                cfg.schedule.rate(st.updates_seen[s])
            };
            st.values[s] += alpha * (g - st.values[s]);
            st.initialized[s] = true;
        }
    }
}

fn online_episode(st: &mut EstimatorState, path: &PathSample, cfg: &TdConfig, gamma: f64) {
    let states = &path.states;
    let last = states.len() - 1;
    let mut active: Vec<usize> = Vec::new();
    let mut fresh: Vec<usize> = Vec::new();
    for t in 0..last {
        let (s, next) = (states[t], states[t + 1]);
        if st.traces[s] == 0.0 && !active.contains(&s) {
            active.push(s);
        }
        match cfg.trace {
            TraceKind::Accumulating => st.traces[s] += 1.0,
            TraceKind::Replacing => st.traces[s] = 1.0,
        }
        st.updates_seen[s] += 1;
        fresh.clear();
        if cfg.modified && !st.initialized[s] {
            fresh.push(s);
        }
        let boot = if t + 1 == last { 0.0 } else { st.values[next] };
        let delta = path.rewards[t] + gamma * boot - st.values[s];
        for &u in &active {
            let alpha = if fresh.contains(&u) { 1.0 } else { cfg.schedule.rate(st.updates_seen[u]) };
            st.values[u] += alpha * delta * st.traces[u];
        }
        st.initialized[s] = true;
        let lambda =
            if cfg.modified && t + 1 != last && !st.initialized[next] { 1.0 } else { cfg.lambda };
        for &u in &active {
            st.traces[u] *= gamma * lambda;
        }
    }
    for &u in &active {
        st.traces[u] = 0.0;
    }
}

/// Runs TD(λ) over the paths in order from a fresh state.
pub fn td_estimate(
    num_states: usize,
    paths: &[PathSample],
    cfg: &TdConfig,
    gamma: f64,
) -> Result<Estimate> {
    cfg.check()?;
    let mut state = EstimatorState::new(num_states, cfg.initial_value);
    for path in paths {
        td_episode(&mut state, path, cfg, gamma);
    }
    Ok(state.estimate())
}

/// Weights `beta_i = alpha_i prod_{j>i} (1 - alpha_j)` of the unrolled TD(0) recursion.
pub fn td0_weights_from_rates(rates: &[f64]) -> Vec<f64> {
    let mut beta = vec![0.0; rates.len()];
    let mut tail = 1.0;
    for i in (0..rates.len()).rev() {
        beta[i] = rates[i] * tail;
        tail *= 1.0 - rates[i];
    }
    beta
}

/// TD(0) weights for `n` examples with the first rate forced to 1.
pub fn td0_weights(n: usize, schedule: LearningRate) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(MrpError::InvalidArgument("need at least one example".into()));
    }
    let rates: Vec<f64> =
        (1..=n as u64).map(|k| if k == 1 { 1.0 } else { schedule.rate(k) }).collect();
    Ok(td0_weights_from_rates(&rates))
}
