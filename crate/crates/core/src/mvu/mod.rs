//! Minimum-variance unbiased estimation: the first-visit Monte Carlo estimate
//! averaged over all path vectors consistent with the observed statistic.

mod closed_form;
mod enumerate;

pub use closed_form::{dilogarithm, ml_two_state_bias, ml_two_state_mse, mvu_two_state_closed, mvu_two_state_mse};
pub use enumerate::{
    enumerate_consistent, ConsistentFamily, EnumerationLimits, PathMultiset, DEFAULT_MAX_MULTISETS,
};

use crate::error::Result;
use crate::model::MrpSpec;
use crate::sampled::Estimate;
use crate::suffstat::SuffStat;
use enumerate::{search, Problem, Sink};

/// Weighted first-visit averages kept on a shifted log scale.
struct MvuSink {
    gamma: f64,
    scale: f64,
    weight: f64,
    sums: Vec<f64>,
    // scratch
    visit_sum: Vec<f64>,
    visit_cnt: Vec<u64>,
    first: Vec<bool>,
}

impl MvuSink {
    fn new(num_states: usize, gamma: f64) -> Self {
        Self {
            gamma,
            scale: f64::NEG_INFINITY,
            weight: 0.0,
            sums: vec![0.0; num_states],
            visit_sum: vec![0.0; num_states],
            visit_cnt: vec![0; num_states],
            first: vec![false; num_states],
        }
    }

    fn add_scaled(&mut self, ln_w: f64, weight: f64, sums: &[f64]) {
        if weight == 0.0 {
            return;
        }
        if ln_w > self.scale {
            let shrink = (self.scale - ln_w).exp();
            self.weight *= shrink;
            self.sums.iter_mut().for_each(|x| *x *= shrink);
            self.scale = ln_w;
        }
        let f = (ln_w - self.scale).exp();
        self.weight += weight * f;
        for (a, b) in self.sums.iter_mut().zip(sums) {
            *a += b * f;
        }
    }
}

impl Sink for MvuSink {
    fn visit(&mut self, problem: &Problem, runs: &[(&[usize], u64)], ln_mult: f64) {
        self.visit_sum.iter_mut().for_each(|x| *x = 0.0);
        self.visit_cnt.iter_mut().for_each(|x| *x = 0);
        for (tokens, count) in runs {
            let steps = &tokens[1..];
            let mut states = Vec::with_capacity(tokens.len());
            states.push(tokens[0]);
            states.extend(steps.iter().map(|&e| problem.edges[e].to));
            self.first.iter_mut().for_each(|x| *x = false);
            let mut firsts = Vec::new();
            for (t, &s) in states.iter().enumerate() {
                if !self.first[s] {
                    self.first[s] = true;
                    firsts.push((t, s));
                }
            }
            // returns from each first-visit position
            let mut g = 0.0;
            let mut t = states.len() - 1;
            for &(pos, s) in firsts.iter().rev() {
                while t > pos {
                    t -= 1;
                    g = problem.edges[steps[t]].reward + self.gamma * g;
                }
                self.visit_sum[s] += *count as f64 * g;
                self.visit_cnt[s] += count;
            }
        }
        let mc: Vec<f64> = self
            .visit_sum
            .iter()
            .zip(&self.visit_cnt)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        self.add_scaled(ln_mult, 1.0, &mc);
    }

    fn absorb(&mut self, other: Self) {
        self.add_scaled(other.scale, other.weight, &other.sums);
    }
}

/// The minimum-variance unbiased estimate for every visited state.
pub fn mvu_estimate(
    stat: &SuffStat,
    spec: &MrpSpec,
    gamma: f64,
    limits: &EnumerationLimits,
) -> Result<Estimate> {
    let problem = Problem::new(stat, spec)?;
    let n = stat.num_states;
    let sink = search(&problem, limits, || MvuSink::new(n, gamma))?;
    let defined: Vec<bool> = stat.visit_counts.iter().map(|&k| k > 0).collect();
    let values = sink
        .sums
        .iter()
        .zip(&defined)
        .map(|(s, &d)| if d { s / sink.weight } else { 0.0 })
        .collect();
    Ok(Estimate { values, defined })
}
