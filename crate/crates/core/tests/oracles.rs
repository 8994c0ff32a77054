mod common;

use std::f64::consts::PI;

use mrp_lab::catalog::{self, TwoStateReward};
use mrp_lab::experiments::{gen_layered_acyclic, LayeredConfig};
use mrp_lab::model_based::{iml_estimate, lstd_from_paths};
use mrp_lab::mvu::{self, dilogarithm, mvu_two_state_closed};
use mrp_lab::sampled::{td0_weights, LearningRate, TraceKind};
use mrp_lab::{
    enumerate_consistent, mc_first_visit, ml_estimate, mvu_estimate, td_estimate, EnumerationLimits, MrpError,
    MrpSpec, PathSample, PathSampler, SuffStat, TdConfig,
};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn two_state_values_match_geometric_series() {
    for &p in &[0.1, 0.5, 0.9] {
        for &g in &[0.3, 0.5, 0.9, 1.0] {
            // sum_k p^k (1-p) g^k for the exit reward, sum_k p^(k+1) g^k for the cycle reward
            let (mut exit, mut cycle, mut w) = (0.0, 0.0, 1.0);
            for _ in 0..5000 {
                exit += w * (1.0 - p);
                cycle += w * p;
                w *= p * g;
            }
            let v = catalog::two_state(p, g, TwoStateReward::Exit).exact_value().unwrap();
            assert!(close(v[0], exit, 1e-12), "p={p} g={g}");
            assert!(close(v[0], (1.0 - p) / (1.0 - g * p), 1e-12));
            let v = catalog::two_state(p, g, TwoStateReward::Cycle).exact_value().unwrap();
            assert!(close(v[0], cycle, 1e-12));
            assert_eq!(v[1], 0.0);
        }
    }
}

#[test]
fn loop_between_two_states_at_unit_discount() {
    for &p in &[0.2, 0.5, 0.8] {
        let v = catalog::two_state_loop(p, 1.0).exact_value().unwrap();
        assert!(close(v[0], p / (1.0 - p), 1e-12));
        assert!(close(v[1], p / (1.0 - p), 1e-12));
    }
}

#[test]
fn zero_mean_rewards_give_zero_values() {
    for spec in [catalog::fork_a([0.5, 0.5]), catalog::fork_b(), catalog::diamond(1.0)] {
        assert!(spec.exact_value().unwrap().iter().all(|v| v.abs() < 1e-15));
    }
}

/// Warshall transitive closure of the one-step relation.
fn brute_force_acyclic(spec: &MrpSpec) -> bool {
    let n = spec.num_states;
    let mut reach: Vec<Vec<bool>> =
        (0..n).map(|i| (0..n).map(|j| !spec.terminal[i] && spec.transitions[i][j] > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    let live = spec.reachable();
    !(0..n).any(|i| live[i] && reach[i][i])
}

#[test]
fn acyclicity_agrees_with_transitive_closure() {
    let mut r = rng(11);
    for _ in 0..200 {
        let spec = common::random_cyclic(&mut r, 5, 1.0);
        assert_eq!(spec.is_acyclic(), brute_force_acyclic(&spec));
        let spec = common::small_layered(&mut r);
        assert!(spec.is_acyclic());
        assert!(brute_force_acyclic(&spec));
    }
}

#[test]
fn lstd_from_paths_equals_ml() {
    let mut r = rng(3);
    for _ in 0..50 {
        let spec = common::random_cyclic(&mut r, 5, 0.8);
        let paths = PathSampler::new(&spec).sample_many(4, &mut r).unwrap();
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let ml = ml_estimate(&stat, spec.gamma).unwrap();
        let lstd = lstd_from_paths(spec.num_states, &paths, spec.gamma);
        for s in 0..spec.num_states {
            if ml.defined[s] {
                assert!(close(ml.values[s], lstd[s], 1e-9), "state {s}: {} vs {}", ml.values[s], lstd[s]);
            }
        }
    }
}

#[test]
fn incremental_ml_matches_batch_ml_after_one_path() {
    let mut r = rng(4);
    for _ in 0..50 {
        let spec = common::small_layered(&mut r);
        let paths = PathSampler::new(&spec).sample_many(1, &mut r).unwrap();
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let ml = ml_estimate(&stat, 1.0).unwrap();
        let iml = iml_estimate(spec.num_states, &paths, 1.0);
        assert_eq!(ml.defined, iml.defined);
        for s in 0..spec.num_states {
            if ml.defined[s] {
                assert!(close(ml.values[s], iml.values[s], 1e-9));
            }
        }
    }
}

#[test]
fn modified_td_ignores_initial_values_on_acyclic_models() {
    let mut r = rng(5);
    for _ in 0..50 {
        let spec = common::small_layered(&mut r);
        let paths = PathSampler::new(&spec).sample_many(5, &mut r).unwrap();
        for lambda in [0.0, 0.5] {
            let base = TdConfig::td_lambda(lambda).modified();
            let a = td_estimate(spec.num_states, &paths, &base, 1.0).unwrap();
            let b = td_estimate(spec.num_states, &paths, &TdConfig { initial_value: 1e6, ..base }, 1.0).unwrap();
            for s in 0..spec.num_states {
                if a.defined[s] {
                    assert!(close(a.values[s], b.values[s], 1e-9));
                }
            }
        }
    }
}

#[test]
fn traces_agree_when_no_state_repeats() {
    let mut r = rng(6);
    for _ in 0..50 {
        let spec = common::small_layered(&mut r);
        let paths = PathSampler::new(&spec).sample_many(5, &mut r).unwrap();
        let acc = TdConfig::td_lambda(0.7);
        let rep = acc.with_trace(TraceKind::Replacing);
        let a = td_estimate(spec.num_states, &paths, &acc, 1.0).unwrap();
        let b = td_estimate(spec.num_states, &paths, &rep, 1.0).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn harmonic_td0_weights_are_uniform() {
    for n in 1..20 {
        let w = td0_weights(n, LearningRate::Harmonic).unwrap();
        assert!(w.iter().all(|x| close(*x, 1.0 / n as f64, 1e-12)));
    }
}

#[test]
fn td_lambda_one_equals_every_visit_mc() {
    let mut r = rng(7);
    for _ in 0..30 {
        let spec = common::small_layered(&mut r);
        let paths = PathSampler::new(&spec).sample_many(4, &mut r).unwrap();
        let td = td_estimate(spec.num_states, &paths, &TdConfig::td_lambda(1.0), 1.0).unwrap();
        let mc = mrp_lab::mc_every_visit(spec.num_states, &paths, 1.0);
        for s in 0..spec.num_states {
            if mc.defined[s] {
                assert!(close(td.values[s], mc.values[s], 1e-9));
            }
        }
    }
}

#[test]
fn dilogarithm_known_values() {
    assert!(close(dilogarithm(1.0), PI * PI / 6.0, 1e-10));
    let ln2 = 2f64.ln();
    assert!(close(dilogarithm(0.5), PI * PI / 12.0 - ln2 * ln2 / 2.0, 1e-10));
    assert_eq!(dilogarithm(0.0), 0.0);
}

#[test]
fn closed_form_for_single_path() {
    // one path with s cycles: the vector is unique, so the estimate is its return
    for s in 0..10u64 {
        let g: f64 = 0.7;
        let ret: f64 = (0..s).map(|k| g.powi(k as i32)).sum();
        assert!(close(mvu_two_state_closed(s, 1, g).unwrap(), ret, 1e-12));
    }
}

/// Every path from state 0 with at most `max_len` transitions, over every reward outcome.
fn all_paths(spec: &MrpSpec, max_len: usize) -> Vec<PathSample> {
    fn go(spec: &MrpSpec, max_len: usize, states: &mut Vec<usize>, rewards: &mut Vec<f64>, out: &mut Vec<PathSample>) {
        let s = *states.last().unwrap();
        if spec.terminal[s] {
            out.push(PathSample::new(states.clone(), rewards.clone()));
            return;
        }
        if rewards.len() == max_len {
            return;
        }
        for j in 0..spec.num_states {
            if spec.transitions[s][j] <= 0.0 {
                continue;
            }
            let model = spec.reward(s, j).clone();
            for k in 0..model.num_outcomes() {
                states.push(j);
                rewards.push(model.outcome_value(k).unwrap());
                go(spec, max_len, states, rewards, out);
                states.pop();
                rewards.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(spec, max_len, &mut vec![0], &mut Vec::new(), &mut out);
    out
}

#[test]
fn mvu_matches_brute_force_average_of_first_visit_mc() {
    let mut r = rng(8);
    let mut checked = 0;
    while checked < 25 {
        let spec = common::random_cyclic(&mut r, 4, 0.9);
        let sample = PathSampler::new(&spec).sample_many(2, &mut r).unwrap();
        let total: usize = sample.iter().map(|p| p.len() - 1).sum();
        if total > 5 {
            continue;
        }
        checked += 1;
        let stat = SuffStat::from_paths(&spec, &sample).unwrap();
        let candidates = all_paths(&spec, total);
        let n = spec.num_states;
        let (mut sums, mut count) = (vec![0.0; n], 0u64);
        for a in &candidates {
            for b in &candidates {
                if a.len() + b.len() - 2 != total {
                    continue;
                }
                let pair = [a.clone(), b.clone()];
                if SuffStat::from_paths(&spec, &pair).unwrap() != stat {
                    continue;
                }
                count += 1;
                let mc = mc_first_visit(n, &pair, spec.gamma);
                for s in 0..n {
                    sums[s] += mc.values[s];
                }
            }
        }
        let family = enumerate_consistent(&stat, &spec, &EnumerationLimits::default()).unwrap();
        assert_eq!(family.total_ordered_count, BigUint::from(count));
        assert_eq!(family.ordered_vectors().len() as u64, count);
        let est = mvu_estimate(&stat, &spec, spec.gamma, &EnumerationLimits::default()).unwrap();
        for s in 0..n {
            if est.defined[s] {
                assert!(close(est.values[s], sums[s] / count as f64, 1e-9));
            }
        }
    }
}

#[test]
fn mvu_equals_ml_on_acyclic_models() {
    let mut r = rng(9);
    for _ in 0..40 {
        let spec = common::small_layered(&mut r);
        let paths = PathSampler::new(&spec).sample_many(4, &mut r).unwrap();
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let ml = ml_estimate(&stat, 1.0).unwrap();
        let est = mvu_estimate(&stat, &spec, 1.0, &EnumerationLimits::default()).unwrap();
        for s in 0..spec.num_states {
            if ml.defined[s] {
                assert!(close(ml.values[s], est.values[s], 1e-9));
            }
        }
    }
}

#[test]
fn single_acyclic_path_has_one_consistent_vector() {
    let spec = catalog::diamond(1.0);
    let path = PathSample::deterministic(&spec, &[0, 1, 2, 3]).unwrap();
    let stat = SuffStat::from_paths(&spec, [&path]).unwrap();
    let family = enumerate_consistent(&stat, &spec, &EnumerationLimits::default()).unwrap();
    assert_eq!(family.total_ordered_count, BigUint::from(1u32));
}

#[test]
fn three_vectors_for_a_loop_split_across_two_paths() {
    // paths (0,0,0,1) and (0,1): two loop steps shared between two paths in 3 ordered ways
    let spec = catalog::two_state(0.5, 0.5, TwoStateReward::Cycle);
    let a = PathSample::deterministic(&spec, &[0, 0, 0, 1]).unwrap();
    let b = PathSample::deterministic(&spec, &[0, 1]).unwrap();
    let stat = SuffStat::from_paths(&spec, [&a, &b]).unwrap();
    let family = enumerate_consistent(&stat, &spec, &EnumerationLimits::default()).unwrap();
    assert_eq!(family.multisets.len(), 2);
    assert_eq!(family.total_ordered_count, BigUint::from(3u32));
    let est = mvu_estimate(&stat, &spec, 0.5, &EnumerationLimits::default()).unwrap();
    assert!(close(est.values[0], mvu_two_state_closed(2, 2, 0.5).unwrap(), 1e-12));
}

#[test]
fn enumeration_cap_is_reported() {
    let spec = catalog::two_state(0.9, 0.9, TwoStateReward::Cycle);
    let paths = PathSampler::new(&spec).sample_many(12, &mut rng(1)).unwrap();
    let stat = SuffStat::from_paths(&spec, &paths).unwrap();
    let limits = EnumerationLimits { max_multisets: 3, ..EnumerationLimits::default() };
    match mvu_estimate(&stat, &spec, 0.9, &limits) {
        Err(MrpError::ResourceCap(msg)) => assert!(!msg.is_empty()),
        other => panic!("expected a cap error, got {other:?}"),
    }
}

#[test]
fn inconsistent_counts_are_infeasible() {
    let spec = catalog::two_state(0.5, 0.5, TwoStateReward::Cycle);
    let path = PathSample::deterministic(&spec, &[0, 0, 1]).unwrap();
    let mut stat = SuffStat::from_paths(&spec, [&path]).unwrap();
    stat.start_counts[0] = 2;
    stat.num_paths = 2;
    assert!(matches!(
        mvu::mvu_estimate(&stat, &spec, 0.5, &EnumerationLimits::default()),
        Err(MrpError::Infeasible(_))
    ));
}

#[test]
fn statistic_and_model_round_trip_through_json() {
    let mut r = rng(10);
    for _ in 0..20 {
        let spec = common::random_cyclic(&mut r, 5, 0.7);
        let back = MrpSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        let paths = PathSampler::new(&spec).sample_many(3, &mut r).unwrap();
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        assert_eq!(SuffStat::from_json(&stat.to_json()).unwrap(), stat);
    }
}

#[test]
fn layered_generation_is_seed_deterministic() {
    let cfg = LayeredConfig::default();
    let a = gen_layered_acyclic(&cfg, &mut rng(42)).unwrap();
    let b = gen_layered_acyclic(&cfg, &mut rng(42)).unwrap();
    assert_eq!(a, b);
    assert!(a.is_acyclic());
    assert!(a.validate().is_empty());
}
