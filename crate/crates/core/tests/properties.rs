mod common;

use mrp_lab::catalog::{self, TwoStateReward};
use mrp_lab::format::num;
use mrp_lab::mvu::mvu_two_state_closed;
use mrp_lab::{
    mc_first_visit, ml_estimate, mse_decompose, mvu_estimate, td_estimate, EnumerationLimits, MrpSpec, PathSample,
    PathSampler, SuffStat, TdConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model_and_paths(seed: u64, n: usize) -> (MrpSpec, Vec<PathSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = common::random_cyclic(&mut rng, 5, 0.9);
    let paths = PathSampler::new(&spec).sample_many(n, &mut rng).unwrap();
    (spec, paths)
}

proptest! {
    #[test]
    fn mse_is_bias_squared_plus_variance(xs in prop::collection::vec(-1e3f64..1e3, 1..50), truth in -1e3f64..1e3) {
        let d = mse_decompose(&xs, truth).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let scale = 1.0 + d.mse;
        prop_assert!((d.bias - (mean - truth)).abs() <= 1e-9 * (1.0 + truth.abs()));
        prop_assert!((d.variance - var).abs() <= 1e-9 * scale);
        prop_assert!((d.mse - d.bias * d.bias - d.variance).abs() <= 1e-9 * scale);
    }

    #[test]
    fn counts_balance_at_every_state(seed in any::<u64>(), n in 1usize..8) {
        let (spec, paths) = model_and_paths(seed, n);
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        prop_assert_eq!(stat.start_counts.iter().sum::<u64>(), n as u64);
        let mut ends = 0;
        for s in 0..spec.num_states {
            let inflow = stat.start_counts[s] + stat.in_count(s);
            if spec.terminal[s] {
                prop_assert_eq!(stat.out_count(s), 0);
                ends += inflow;
            } else {
                prop_assert_eq!(inflow, stat.out_count(s));
            }
        }
        prop_assert_eq!(ends, n as u64);
        prop_assert!(stat.check(Some(&spec)).is_ok());
    }

    #[test]
    fn statistic_ignores_path_order_and_merges(seed in any::<u64>(), n in 2usize..8) {
        let (spec, paths) = model_and_paths(seed, n);
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let rev: Vec<_> = paths.iter().rev().cloned().collect();
        prop_assert_eq!(&SuffStat::from_paths(&spec, &rev).unwrap(), &stat);
        let (a, b) = paths.split_at(n / 2);
        let mut merged = SuffStat::from_paths(&spec, a).unwrap();
        merged.merge(&SuffStat::from_paths(&spec, b).unwrap()).unwrap();
        prop_assert_eq!(&merged, &stat);
    }

    #[test]
    fn ml_rows_are_distributions(seed in any::<u64>(), n in 1usize..8) {
        let (spec, paths) = model_and_paths(seed, n);
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let params = stat.ml_params().unwrap();
        for i in 0..spec.num_states {
            let row: f64 = params.p_bar.row(i).sum();
            if stat.out_count(i) > 0 {
                prop_assert!((row - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(row, 0.0);
            }
        }
        prop_assert!((params.start_bar.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_defined_exactly_on_visited_states(seed in any::<u64>(), n in 1usize..6) {
        let (spec, paths) = model_and_paths(seed, n);
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let visited: Vec<bool> = (0..spec.num_states).map(|s| paths.iter().any(|p| p.states.contains(&s))).collect();
        prop_assert_eq!(&mc_first_visit(spec.num_states, &paths, spec.gamma).defined, &visited);
        prop_assert_eq!(&ml_estimate(&stat, spec.gamma).unwrap().defined, &visited);
        let td = td_estimate(spec.num_states, &paths, &TdConfig::default(), spec.gamma).unwrap();
        prop_assert_eq!(&td.defined, &visited);
    }

    #[test]
    fn mvu_ignores_path_order(seed in any::<u64>()) {
        let (spec, paths) = model_and_paths(seed, 2);
        prop_assume!(paths.iter().map(|p| p.len()).sum::<usize>() <= 12);
        let rev: Vec<_> = paths.iter().rev().cloned().collect();
        let lim = EnumerationLimits::default();
        let a = mvu_estimate(&SuffStat::from_paths(&spec, &paths).unwrap(), &spec, spec.gamma, &lim).unwrap();
        let b = mvu_estimate(&SuffStat::from_paths(&spec, &rev).unwrap(), &spec, spec.gamma, &lim).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn closed_form_matches_enumeration(cycles in prop::collection::vec(0usize..4, 1..4), g in 0.05f64..1.0) {
        let spec = catalog::two_state(0.5, g, TwoStateReward::Cycle);
        let paths: Vec<PathSample> = cycles
            .iter()
            .map(|&c| {
                let mut states = vec![0; c + 1];
                states.push(1);
                PathSample::deterministic(&spec, &states).unwrap()
            })
            .collect();
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let est = mvu_estimate(&stat, &spec, g, &EnumerationLimits::default()).unwrap();
        let s = cycles.iter().sum::<usize>() as u64;
        let closed = mvu_two_state_closed(s, cycles.len() as u64, g).unwrap();
        prop_assert!((est.values[0] - closed).abs() < 1e-9 * (1.0 + closed));
    }

    #[test]
    fn closed_form_is_bounded_and_monotone(n in 1u64..30, g in 0.01f64..0.99) {
        let mut prev = 0.0;
        for s in 0..60 {
            let v = mvu_two_state_closed(s, n, g).unwrap();
            prop_assert!(v >= prev - 1e-12);
            prop_assert!(v <= s as f64 / n as f64 + 1e-9);
            prop_assert!(v < 1.0 / (1.0 - g) + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn formatted_numbers_parse_back_closely(x in prop::num::f64::NORMAL) {
        let back: f64 = num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
    }
}
