//! Small reference MRPs used throughout the tests and the experiments.
//!
//! States are 0-based. Comments give the conventional 1-based labels.

use std::collections::BTreeMap;

use crate::model::{MrpSpec, RewardModel};

/// Which edge of the two-state cycle pays the unit reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoStateReward {
    /// `R11 = 1`, `R12 = 0`.
    Cycle,
    /// `R11 = 0`, `R12 = 1`; then `V1 = (1-p)/(1-gamma p)`.
    Exit,
}

/// State 1 loops on itself with probability `p`, otherwise exits to terminal state 2.
pub fn two_state(p: f64, gamma: f64, reward: TwoStateReward) -> MrpSpec {
    let (r_cycle, r_exit) = match reward {
        TwoStateReward::Cycle => (1.0, 0.0),
        TwoStateReward::Exit => (0.0, 1.0),
    };
    MrpSpec {
        num_states: 2,
        start_probs: vec![1.0, 0.0],
        transitions: vec![vec![p, 1.0 - p], vec![0.0, 0.0]],
        rewards: BTreeMap::from([
            ((0, 0), RewardModel::Deterministic(r_cycle)),
            ((0, 1), RewardModel::Deterministic(r_exit)),
        ]),
        gamma,
        terminal: vec![false, true],
    }
}

/// Start in state 2; `2 -> 1` (reward 1) with probability `p`, `1 -> 2` always,
/// `2 -> 3` terminates. At `gamma = 1`, `V1 = V2 = p/(1-p)`.
pub fn two_state_loop(p: f64, gamma: f64) -> MrpSpec {
    MrpSpec {
        num_states: 3,
        start_probs: vec![0.0, 1.0, 0.0],
        transitions: vec![vec![0.0, 1.0, 0.0], vec![p, 0.0, 1.0 - p], vec![0.0; 3]],
        rewards: BTreeMap::from([((1, 0), RewardModel::Deterministic(1.0))]),
        gamma,
        terminal: vec![false, false, true],
    }
}

fn coin() -> RewardModel {
    RewardModel::Discrete(vec![(1.0, 0.5), (-1.0, 0.5)])
}

/// `1 -> 2` pays ±1, then `2 -> 3` pays +1 or `2 -> 4` pays -1, each with probability 1/2.
/// `starts` holds the start probabilities of states 1 and 2.
pub fn fork_a(starts: [f64; 2]) -> MrpSpec {
    MrpSpec {
        num_states: 4,
        start_probs: vec![starts[0], starts[1], 0.0, 0.0],
        transitions: vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.5],
            vec![0.0; 4],
            vec![0.0; 4],
        ],
        rewards: BTreeMap::from([
            ((0, 1), coin()),
            ((1, 2), RewardModel::Deterministic(1.0)),
            ((1, 3), RewardModel::Deterministic(-1.0)),
        ]),
        gamma: 1.0,
        terminal: vec![false, false, true, true],
    }
}

/// States 1 and 2 start with probability 1/2 each and feed state 3 at no reward;
/// `3 -> T` pays ±1.
pub fn fork_b() -> MrpSpec {
    MrpSpec {
        num_states: 4,
        start_probs: vec![0.5, 0.5, 0.0, 0.0],
        transitions: vec![
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0; 4],
        ],
        rewards: BTreeMap::from([((2, 3), coin())]),
        gamma: 1.0,
        terminal: vec![false, false, false, true],
    }
}

/// Acyclic five-state MRP: `1 -> {2, 3}`, `2 -> 3`, `3 -> 4` pays +1, `3 -> 5` pays -1.
pub fn diamond(gamma: f64) -> MrpSpec {
    MrpSpec {
        num_states: 5,
        start_probs: vec![1.0, 0.0, 0.0, 0.0, 0.0],
        transitions: vec![
            vec![0.0, 0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.5, 0.5],
            vec![0.0; 5],
            vec![0.0; 5],
        ],
        rewards: BTreeMap::from([
            ((2, 3), RewardModel::Deterministic(1.0)),
            ((2, 4), RewardModel::Deterministic(-1.0)),
        ]),
        gamma,
        terminal: vec![false, false, false, true, true],
    }
}

/// Deterministic chain `0 -> 1 -> ... -> k` paying `rewards[t]` on step `t`.
pub fn chain(rewards: &[f64], gamma: f64) -> MrpSpec {
    let n = rewards.len() + 1;
    let mut transitions = vec![vec![0.0; n]; n];
    let mut map = BTreeMap::new();
    for (t, r) in rewards.iter().enumerate() {
        transitions[t][t + 1] = 1.0;
        map.insert((t, t + 1), RewardModel::Deterministic(*r));
    }
    let mut start_probs = vec![0.0; n];
    start_probs[0] = 1.0;
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    MrpSpec { num_states: n, start_probs, transitions, rewards: map, gamma, terminal }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid() {
        for spec in [
            two_state(0.5, 1.0, TwoStateReward::Cycle),
            two_state_loop(0.5, 1.0),
            fork_a([1.0, 0.0]),
            fork_a([0.5, 0.5]),
            fork_b(),
            diamond(0.9),
            chain(&[1.0, 2.0, 3.0], 1.0),
        ] {
            assert!(spec.validate().is_empty(), "{:?}", spec.validate());
        }
    }

    #[test]
    fn acyclicity_of_catalog() {
        assert!(!two_state(0.5, 1.0, TwoStateReward::Cycle).is_acyclic());
        assert!(!two_state_loop(0.5, 1.0).is_acyclic());
        assert!(fork_a([1.0, 0.0]).is_acyclic());
        assert!(fork_b().is_acyclic());
        assert!(diamond(1.0).is_acyclic());
    }
}
