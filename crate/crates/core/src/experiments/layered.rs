use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{MrpError, Result};
use crate::model::{MrpSpec, RewardModel};

/// Random layered acyclic MRP.
///
/// State 0 is the target state and forms layer 0 on its own. Layers
/// `1..=num_layers` follow, each with between `ceil(max/2)` and `max` states;
/// the last layer is terminal. Every state links to every state of the next
/// layer with flat-Dirichlet transition weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredConfig {
    pub num_layers: usize,
    pub max_states_per_layer: usize,
    /// Number of layers after the target that may hold start states.
    pub start_layers: usize,
    /// Start probability of the target state.
    pub start_prob_target: f64,
    /// Fraction of edges paying `high_reward` instead of a uniform base reward.
    pub high_reward_fraction: f64,
    pub high_reward: f64,
    pub base_reward: (f64, f64),
}

impl Default for LayeredConfig {
    fn default() -> Self {
        Self {
            num_layers: 10,
            max_states_per_layer: 20,
            start_layers: 4,
            start_prob_target: 0.2,
            high_reward_fraction: 0.02,
            high_reward: 1000.0,
            base_reward: (0.0, 1.0),
        }
    }
}

impl LayeredConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(MrpError::InvalidArgument(m.into()));
        if self.num_layers < 2 {
            return bad("need at least two layers after the target");
        }
        if self.max_states_per_layer == 0 {
            return bad("layers need at least one state");
        }
        if self.start_layers == 0 && self.start_prob_target < 1.0 {
            return bad("start mass outside the target needs at least one start layer");
        }
        if !(0.0..=1.0).contains(&self.start_prob_target) || !(0.0..=1.0).contains(&self.high_reward_fraction) {
            return bad("probabilities must lie in [0,1]");
        }
        if !(self.base_reward.0 <= self.base_reward.1) || !self.high_reward.is_finite() {
            return bad("bad reward range");
        }
        Ok(())
    }
}

fn flat_dirichlet<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln() + f64::MIN_POSITIVE).collect();
    let total: f64 = draws.iter().sum();
    let mut w: Vec<f64> = draws.iter().map(|x| x / total).collect();
    // push the rounding residue onto the largest weight
    let resid = 1.0 - w.iter().sum::<f64>();
    let big = (0..k).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
    w[big] += resid;
    w
}

pub fn gen_layered_acyclic<R: Rng + ?Sized>(cfg: &LayeredConfig, rng: &mut R) -> Result<MrpSpec> {
    cfg.check()?;
    let lo = cfg.max_states_per_layer.div_ceil(2);
    let mut layers: Vec<Vec<usize>> = vec![vec![0]];
    let mut next = 1;
    for _ in 0..cfg.num_layers {
        let size = rng.gen_range(lo..=cfg.max_states_per_layer);
        layers.push((next..next + size).collect());
        next += size;
    }
    let n = next;
    let mut transitions = vec![vec![0.0; n]; n];
    let mut rewards = BTreeMap::new();
    for w in layers.windows(2) {
        for &i in &w[0] {
            let probs = flat_dirichlet(w[1].len(), rng);
            for (&j, p) in w[1].iter().zip(probs) {
                transitions[i][j] = p;
                let r = if rng.gen::<f64>() < cfg.high_reward_fraction {
                    cfg.high_reward
                } else {
                    rng.gen_range(cfg.base_reward.0..=cfg.base_reward.1)
                };
                rewards.insert((i, j), RewardModel::Deterministic(r));
            }
        }
    }
    let mut start_probs = vec![0.0; n];
    start_probs[0] = cfg.start_prob_target;
    let start_layers = cfg.start_layers.min(cfg.num_layers - 1);
    let others: Vec<usize> = layers[1..=start_layers].iter().flatten().copied().collect();
    if !others.is_empty() {
        let share = (1.0 - cfg.start_prob_target) / others.len() as f64;
        for &s in &others {
            start_probs[s] = share;
        }
    } else {
        start_probs[0] = 1.0;
    }
    let mut terminal = vec![false; n];
    for &s in &layers[cfg.num_layers] {
        terminal[s] = true;
    }
    let spec = MrpSpec { num_states: n, start_probs, transitions, rewards, gamma: 1.0, terminal };
    spec.check()?;
    Ok(spec)
}

/// Start states other than the target state 0.
pub fn subgraph_start_states(spec: &MrpSpec) -> Vec<usize> {
    (1..spec.num_states).filter(|&i| spec.start_probs[i] > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_size_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = gen_layered_acyclic(&LayeredConfig::default(), &mut rng).unwrap();
        assert!((101..=201).contains(&spec.num_states));
        assert!(spec.is_acyclic());
        assert!(spec.validate().is_empty());
        assert!((spec.start_probs[0] - 0.2).abs() < 1e-15);
        assert!(!subgraph_start_states(&spec).is_empty());
    }
}
