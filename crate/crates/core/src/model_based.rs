//! Estimators that go through the maximum-likelihood model, and the
//! operators whose fixed point is the ML value.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{MrpError, Result};
use crate::linalg;
use crate::model::PathSample;
use crate::sampled::Estimate;
use crate::suffstat::{MlParams, SuffStat};

/// Solves `V = r + gamma P V` on the states with an observed exit.
///
/// Acyclic models are solved by back-substitution; otherwise partial-pivot LU,
/// falling back to the SVD pseudoinverse when the system is near singular.
fn solve_bellman(params: &MlParams, gamma: f64) -> Vec<f64> {
    let n = params.num_states();
    let p = &params.p_bar;
    let r = params.expected_rewards();
    let active: Vec<usize> = (0..n).filter(|&i| p.row(i).iter().any(|&x| x != 0.0)).collect();
    let mut values = vec![0.0; n];
    if active.is_empty() {
        return values;
    }
    if let Some(order) = topological_order(p, &active) {
        for &i in order.iter().rev() {
            let mut acc = 0.0;
            for j in 0..n {
                let pij = p[(i, j)];
                if pij != 0.0 {
                    acc += pij * values[j];
                }
            }
            values[i] = r[i] + gamma * acc;
        }
        return values;
    }
    let m = active.len();
    let a = DMatrix::from_fn(m, m, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        delta - gamma * p[(active[a], active[b])]
    });
    let b = DVector::from_fn(m, |a, _| r[active[a]]);
    let x = linalg::solve_or_pinv(&a, &b);
    for (k, &i) in active.iter().enumerate() {
        values[i] = x[k];
    }
    values
}

/// Kahn order of `active` under positive entries of `p`; `None` on a cycle.
fn topological_order(p: &DMatrix<f64>, active: &[usize]) -> Option<Vec<usize>> {
    let n = p.nrows();
    let mut is_active = vec![false; n];
    for &i in active {
        is_active[i] = true;
    }
    let mut indeg = vec![0usize; n];
    for &i in active {
        for j in 0..n {
            if p[(i, j)] != 0.0 && is_active[j] {
                indeg[j] += 1;
            }
        }
    }
    let mut queue: Vec<usize> = active.iter().copied().filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(active.len());
    while let Some(i) = queue.pop() {
        order.push(i);
        for j in 0..n {
            if p[(i, j)] != 0.0 && is_active[j] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push(j);
                }
            }
        }
    }
    (order.len() == active.len()).then_some(order)
}

/// Value of the maximum-likelihood model, `(I - gamma P)^-1 r`.
pub fn ml_value(params: &MlParams, gamma: f64) -> Vec<f64> {
    solve_bellman(params, gamma)
}

/// Fixed point of the empirical Bellman equation `V = r + gamma P V`.
pub fn lstd_value(params: &MlParams, gamma: f64) -> Vec<f64> {
    solve_bellman(params, gamma)
}

/// ML estimate with visited states marked as defined.
pub fn ml_estimate(stat: &SuffStat, gamma: f64) -> Result<Estimate> {
    let params = stat.ml_params()?;
    Ok(Estimate {
        values: ml_value(&params, gamma),
        defined: stat.visit_counts.iter().map(|&k| k > 0).collect(),
    })
}

/// Tabular LSTD accumulated transition by transition:
/// `A = sum phi(s)(phi(s) - gamma phi(s'))^T`, `b = sum phi(s) r`.
pub fn lstd_from_paths(num_states: usize, paths: &[PathSample], gamma: f64) -> Vec<f64> {
    let mut a = DMatrix::<f64>::zeros(num_states, num_states);
    let mut b = DVector::<f64>::zeros(num_states);
    for path in paths {
        let last = path.len() - 1;
        for (t, (s, next, r)) in path.transitions().enumerate() {
            a[(s, s)] += 1.0;
            if t + 1 != last {
                a[(s, next)] -= gamma;
            }
            b[s] += r;
        }
    }
    let active: Vec<usize> = (0..num_states).filter(|&i| a[(i, i)] != 0.0).collect();
    let m = active.len();
    let sub = DMatrix::from_fn(m, m, |x, y| a[(active[x], active[y])]);
    let rhs = DVector::from_fn(m, |x, _| b[active[x]]);
    let sol = linalg::solve_or_pinv(&sub, &rhs);
    let mut values = vec![0.0; num_states];
    for (k, &i) in active.iter().enumerate() {
        values[i] = sol[k];
    }
    values
}

fn check_len(v: &[f64], params: &MlParams) -> Result<()> {
    if v.len() != params.num_states() {
        return Err(MrpError::InvalidArgument(format!(
            "value vector has {} entries, model has {} states",
            v.len(),
            params.num_states()
        )));
    }
    Ok(())
}

/// One application of `T V = r + gamma P V`.
pub fn bellman_apply(v: &[f64], params: &MlParams, gamma: f64) -> Result<Vec<f64>> {
    check_len(v, params)?;
    let v = DVector::from_column_slice(v);
    let out = params.expected_rewards() + &params.p_bar * v * gamma;
    Ok(out.iter().copied().collect())
}

/// `S(n) V = ((n-1)/n) V + (1/n) T V`, the full-vector TD(0) step with rate `1/n`.
pub fn td0_operator_apply(v: &[f64], params: &MlParams, gamma: f64, n: u64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(MrpError::InvalidArgument("step index must be at least 1".into()));
    }
    let tv = bellman_apply(v, params, gamma)?;
    let w = 1.0 / n as f64;
    Ok(v.iter().zip(&tv).map(|(a, b)| (1.0 - w) * a + w * b).collect())
}

/// Bellman update of a single coordinate.
pub fn iml_update(v: &mut [f64], params: &MlParams, gamma: f64, state: usize) -> Result<()> {
    check_len(v, params)?;
    if state >= v.len() {
        return Err(MrpError::InvalidArgument(format!("state {state} out of range")));
    }
    let mut acc = 0.0;
    for j in 0..v.len() {
        let p = params.p_bar[(state, j)];
        if p != 0.0 {
            acc += p * (params.r_bar[(state, j)] + gamma * v[j]);
        }
    }
    v[state] = acc;
    Ok(())
}

/// `p_k = (1 - c + 2c(k-1)/(n-1)) / n` for `k = 1..n`.
pub fn state_prior(n: usize, c: f64) -> Result<Vec<f64>> {
    if n == 0 || !(0.0..=1.0).contains(&c) {
        return Err(MrpError::InvalidArgument(format!("prior needs n >= 1 and c in [0,1], got n={n}, c={c}")));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let m = 1.0 / n as f64;
    Ok((0..n).map(|k| (1.0 - c + 2.0 * c * k as f64 / (n - 1) as f64) * m).collect())
}

/// Draws a state from `prior`, applies [`iml_update`] to it and returns the state.
pub fn statewise_random_apply<R: Rng + ?Sized>(
    v: &mut [f64],
    params: &MlParams,
    gamma: f64,
    prior: &[f64],
    rng: &mut R,
) -> Result<usize> {
    let sampler = prior_sampler(prior, v.len())?;
    let state = sampler.sample(rng);
    iml_update(v, params, gamma, state)?;
    Ok(state)
}

pub(crate) fn prior_sampler(prior: &[f64], n: usize) -> Result<WeightedIndex<f64>> {
    let total: f64 = prior.iter().sum();
    if prior.len() != n || prior.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(MrpError::InvalidArgument("prior is not a distribution over the states".into()));
    }
    WeightedIndex::new(prior).map_err(|e| MrpError::InvalidArgument(e.to_string()))
}

/// Incremental ML: keeps running counts and, after each path, applies the
/// single-state Bellman update to the visited states from the end backwards.
#[derive(Clone, Debug)]
pub struct ImlLearner {
    gamma: f64,
    edges: Vec<BTreeMap<usize, (u64, f64)>>,
    exits: Vec<u64>,
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl ImlLearner {
    pub fn new(num_states: usize, gamma: f64) -> Self {
        Self {
            gamma,
            edges: vec![BTreeMap::new(); num_states],
            exits: vec![0; num_states],
            values: vec![0.0; num_states],
            defined: vec![false; num_states],
        }
    }

    pub fn observe(&mut self, path: &PathSample) {
        for (i, j, r) in path.transitions() {
            let e = self.edges[i].entry(j).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += r;
            self.exits[i] += 1;
        }
        for &s in path.states.iter().rev() {
            self.defined[s] = true;
            let k = self.exits[s];
            if k == 0 {
                continue;
            }
            let acc: f64 = self.edges[s]
                .iter()
                .map(|(&j, &(c, sum))| sum + self.gamma * c as f64 * self.values[j])
                .sum();
            self.values[s] = acc / k as f64;
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { values: self.values.clone(), defined: self.defined.clone() }
    }
}

pub fn iml_estimate(num_states: usize, paths: &[PathSample], gamma: f64) -> Estimate {
    let mut learner = ImlLearner::new(num_states, gamma);
    for path in paths {
        learner.observe(path);
    }
    learner.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, TwoStateReward};

    #[test]
    fn cycle_count_over_paths_at_unit_discount() {
        let spec = catalog::two_state(0.5, 1.0, TwoStateReward::Cycle);
        let paths = [
            PathSample::deterministic(&spec, &[0, 0, 0, 0, 1]).unwrap(),
            PathSample::deterministic(&spec, &[0, 0, 1]).unwrap(),
            PathSample::deterministic(&spec, &[0, 1]).unwrap(),
        ];
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        let v = ml_value(&stat.ml_params().unwrap(), 1.0);
        assert!((v[0] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prior_endpoints() {
        let p = state_prior(11, 0.1).unwrap();
        let m = 1.0 / 11.0;
        assert!((p[0] - 0.9 * m).abs() < 1e-15 && (p[10] - 1.1 * m).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(state_prior(5, 0.0).unwrap().iter().all(|&x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn td_operator_rejects_zero_step() {
        let params = MlParams::new(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1));
        assert!(td0_operator_apply(&[0.0], &params, 0.5, 0).is_err());
    }

    #[test]
    fn terminal_update_is_a_no_op() {
        let spec = catalog::chain(&[2.0], 1.0);
        let stat = SuffStat::from_paths(&spec, [&PathSample::deterministic(&spec, &[0, 1]).unwrap()]).unwrap();
        let params = stat.ml_params().unwrap();
        let mut v = vec![5.0, 0.0];
        iml_update(&mut v, &params, 1.0, 1).unwrap();
        assert_eq!(v, vec![5.0, 0.0]);
    }
}
