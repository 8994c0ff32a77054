#![allow(dead_code)]

use std::collections::BTreeMap;

use mrp_lab::experiments::{gen_layered_acyclic, LayeredConfig};
use mrp_lab::{MrpSpec, RewardModel};
use rand::Rng;

/// Cyclic model on at most `max_states` states: state 0 starts, the last
/// state is terminal, every other state exits with probability in [0.3, 0.7]
/// and spreads the rest over a random nonempty set of non-terminal states.
pub fn random_cyclic<R: Rng>(rng: &mut R, max_states: usize, gamma: f64) -> MrpSpec {
    let k = rng.gen_range(1..max_states);
    let n = k + 1;
    let mut transitions = vec![vec![0.0; n]; n];
    let mut rewards = BTreeMap::new();
    for i in 0..k {
        let exit = rng.gen_range(0.3..0.7);
        transitions[i][k] = exit;
        let mut targets: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.6)).collect();
        if targets.is_empty() {
            targets.push(rng.gen_range(0..k));
        }
        let w: Vec<f64> = targets.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        for (&j, wj) in targets.iter().zip(&w) {
            transitions[i][j] = (1.0 - exit) * wj / total;
        }
        let sum: f64 = transitions[i].iter().sum();
        transitions[i][k] += 1.0 - sum;
        for j in 0..n {
            if transitions[i][j] > 0.0 {
                rewards.insert((i, j), random_reward(rng));
            }
        }
    }
    let mut start_probs = vec![0.0; n];
    start_probs[0] = 1.0;
    let mut terminal = vec![false; n];
    terminal[k] = true;
    MrpSpec { num_states: n, start_probs, transitions, rewards, gamma, terminal }
}

pub fn random_reward<R: Rng>(rng: &mut R) -> RewardModel {
    if rng.gen_bool(0.5) {
        RewardModel::Deterministic(rng.gen_range(-2i32..=2) as f64)
    } else {
        let q = rng.gen_range(0.2..0.8);
        RewardModel::Discrete(vec![(rng.gen_range(-2i32..=0) as f64, q), (rng.gen_range(1i32..=3) as f64, 1.0 - q)])
    }
}

/// Small random layered model: 2..=4 layers of at most 3 states, starts spread
/// over all non-terminal layers.
pub fn small_layered<R: Rng>(rng: &mut R) -> MrpSpec {
    let num_layers = rng.gen_range(2..=4);
    let cfg = LayeredConfig {
        num_layers,
        max_states_per_layer: rng.gen_range(1..=3),
        start_layers: num_layers - 1,
        start_prob_target: rng.gen_range(0.1..0.9),
        high_reward_fraction: 0.02,
        ..LayeredConfig::default()
    };
    gen_layered_acyclic(&cfg, rng).unwrap()
}
