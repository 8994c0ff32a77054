//! Count statistics of observed paths and the maximum-likelihood parameters.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MrpError, Result};
use crate::model::{MrpSpec, PathSample};

/// Start, transition and visit counts plus reward information of a path set.
///
/// `reward_event_counts[(i, j)][k]` counts how often edge `i -> j` paid its
/// `k`-th support value (a single slot for deterministic rewards).
#[derive(Clone, Debug, PartialEq)]
pub struct SuffStat {
    pub num_states: usize,
    pub num_paths: u64,
    pub start_counts: Vec<u64>,
    pub transition_counts: Vec<Vec<u64>>,
    pub visit_counts: Vec<u64>,
    pub reward_sums: Vec<Vec<f64>>,
    pub reward_event_counts: BTreeMap<(usize, usize), Vec<u64>>,
}

impl SuffStat {
    pub fn new(num_states: usize) -> Self {
        Self {
            num_states,
            num_paths: 0,
            start_counts: vec![0; num_states],
            transition_counts: vec![vec![0; num_states]; num_states],
            visit_counts: vec![0; num_states],
            reward_sums: vec![vec![0.0; num_states]; num_states],
            reward_event_counts: BTreeMap::new(),
        }
    }

    pub fn from_paths<'a>(
        spec: &MrpSpec,
        paths: impl IntoIterator<Item = &'a PathSample>,
    ) -> Result<Self> {
        let mut stat = Self::new(spec.num_states);
        for path in paths {
            stat.accumulate(spec, path)?;
        }
        Ok(stat)
    }

    /// Adds one path. Reward sums are rebuilt from the event counts so the
    /// result does not depend on the order in which paths arrive.
    pub fn accumulate(&mut self, spec: &MrpSpec, path: &PathSample) -> Result<()> {
        if spec.num_states != self.num_states {
            return Err(MrpError::InvalidArgument(format!(
                "statistic has {} states, MRP has {}",
                self.num_states, spec.num_states
            )));
        }
        path.check(spec)?;
        self.num_paths += 1;
        self.start_counts[path.states[0]] += 1;
        for &s in &path.states {
            self.visit_counts[s] += 1;
        }
        for (i, j, r) in path.transitions() {
            self.transition_counts[i][j] += 1;
            let model = spec.reward(i, j);
            let k = model.outcome_index(r).expect("checked against the support");
            let events = self
                .reward_event_counts
                .entry((i, j))
                .or_insert_with(|| vec![0; model.num_outcomes()]);
            events[k] += 1;
            self.reward_sums[i][j] = events
                .iter()
                .enumerate()
                .map(|(k, &c)| c as f64 * model.outcome_value(k).unwrap_or(0.0))
                .sum();
        }
        Ok(())
    }

    /// Componentwise sum.
    pub fn merge(&mut self, other: &SuffStat) -> Result<()> {
        if other.num_states != self.num_states {
            return Err(MrpError::InvalidArgument("merging statistics of different sizes".into()));
        }
        self.num_paths += other.num_paths;
        for i in 0..self.num_states {
            self.start_counts[i] += other.start_counts[i];
            self.visit_counts[i] += other.visit_counts[i];
            for j in 0..self.num_states {
                self.transition_counts[i][j] += other.transition_counts[i][j];
                self.reward_sums[i][j] += other.reward_sums[i][j];
            }
        }
        for (edge, counts) in &other.reward_event_counts {
            let mine = self.reward_event_counts.entry(*edge).or_insert_with(|| vec![0; counts.len()]);
            if mine.len() != counts.len() {
                return Err(MrpError::InvalidStatistic(format!(
                    "edge {}->{} has mismatched reward supports",
                    edge.0, edge.1
                )));
            }
            for (a, b) in mine.iter_mut().zip(counts) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn in_count(&self, state: usize) -> u64 {
        (0..self.num_states).map(|i| self.transition_counts[i][state]).sum()
    }

    pub fn out_count(&self, state: usize) -> u64 {
        self.transition_counts[state].iter().sum()
    }

    /// Checks the flow identities; with `spec`, also the topology and terminal mask.
    pub fn check(&self, spec: Option<&MrpSpec>) -> Result<()> {
        let n = self.num_states;
        let bad = |msg: String| Err(MrpError::InvalidStatistic(msg));
        if self.start_counts.len() != n
            || self.visit_counts.len() != n
            || self.transition_counts.len() != n
            || self.transition_counts.iter().any(|r| r.len() != n)
            || self.reward_sums.len() != n
            || self.reward_sums.iter().any(|r| r.len() != n)
        {
            return bad("dimension mismatch".into());
        }
        if self.start_counts.iter().sum::<u64>() != self.num_paths {
            return bad("start counts do not sum to the number of paths".into());
        }
        for s in 0..n {
            if self.visit_counts[s] != self.start_counts[s] + self.in_count(s) {
                return bad(format!("state {s}: visits differ from starts plus entries"));
            }
            let out = self.out_count(s);
            let terminal = spec.map(|sp| sp.terminal[s]);
            let ok = match terminal {
                Some(true) => out == 0,
                Some(false) => out == self.visit_counts[s],
                None => out == 0 || out == self.visit_counts[s],
            };
            if !ok {
                return bad(format!("state {s}: exits do not match visits"));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mu = self.transition_counts[i][j];
                let events = self.reward_event_counts.get(&(i, j));
                if mu > 0 && events.is_none() {
                    return bad(format!("edge {i}->{j} has no reward events"));
                }
                if let Some(events) = events {
                    if events.iter().sum::<u64>() != mu {
                        return bad(format!("edge {i}->{j}: reward events do not sum to its count"));
                    }
                }
            }
        }
        if let Some(spec) = spec {
            if spec.num_states != n {
                return bad("statistic and MRP differ in size".into());
            }
            for (&(i, j), events) in &self.reward_event_counts {
                if i >= n || j >= n {
                    return bad(format!("edge {i}->{j} out of range"));
                }
                let mu = self.transition_counts[i][j];
                if mu > 0 && !spec.has_edge(i, j) {
                    return bad(format!("edge {i}->{j} is not in the topology"));
                }
                if events.len() != spec.reward(i, j).num_outcomes() {
                    return bad(format!("edge {i}->{j}: event counts do not match the reward support"));
                }
            }
        }
        Ok(())
    }

    /// Maximum-likelihood transition, start and reward estimates.
    pub fn ml_params(&self) -> Result<MlParams> {
        if self.num_paths == 0 {
            return Err(MrpError::NoData);
        }
        let n = self.num_states;
        let mut p_bar = DMatrix::zeros(n, n);
        let mut r_bar = DMatrix::zeros(n, n);
        for i in 0..n {
            let k = self.visit_counts[i];
            if k == 0 {
                continue;
            }
            for j in 0..n {
                let mu = self.transition_counts[i][j];
                if mu > 0 {
                    p_bar[(i, j)] = mu as f64 / k as f64;
                    r_bar[(i, j)] = self.reward_sums[i][j] / mu as f64;
                }
            }
        }
        let total = self.num_paths as f64;
        let start_bar = (0..n)
            .map(|i| self.visit_counts[i].saturating_sub(self.in_count(i)) as f64 / total)
            .collect();
        Ok(MlParams { p_bar, start_bar, r_bar })
    }

    /// Marks each state `s` for which every occurrence of every successor of `s`
    /// in every path is preceded by `s` in that path.
    pub fn full_information_states(&self, paths: &[PathSample]) -> Vec<bool> {
        let n = self.num_states;
        let mut flags = vec![false; n];
        for (s, flag) in flags.iter_mut().enumerate() {
            if self.visit_counts[s] == 0 {
                continue;
            }
            let mut succ = vec![false; n];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if self.transition_counts[u][v] > 0 && !succ[v] {
                        succ[v] = true;
                        stack.push(v);
                    }
                }
            }
            succ[s] = false;
            *flag = paths.iter().all(|path| {
                let first = path.states.iter().position(|&x| x == s).unwrap_or(usize::MAX);
                path.states.iter().enumerate().all(|(t, &x)| !succ[x] || t > first)
            });
        }
        flags
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StatFile::from(self)).expect("statistic serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StatFile = serde_json::from_str(text)?;
        let stat = file.into_stat()?;
        stat.check(None)?;
        Ok(stat)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Maximum-likelihood model: empirical transitions, starts and mean edge rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct MlParams {
    pub p_bar: DMatrix<f64>,
    pub start_bar: Vec<f64>,
    pub r_bar: DMatrix<f64>,
}

impl MlParams {
    /// Model with a uniform start vector.
    pub fn new(p_bar: DMatrix<f64>, r_bar: DMatrix<f64>) -> Self {
        let n = p_bar.nrows();
        Self { p_bar, start_bar: vec![1.0 / n as f64; n], r_bar }
    }

    pub fn num_states(&self) -> usize {
        self.p_bar.nrows()
    }

    /// `r_i = sum_j p_ij r_ij`.
    pub fn expected_rewards(&self) -> DVector<f64> {
        self.p_bar.component_mul(&self.r_bar).column_sum()
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeEvents {
    from: usize,
    to: usize,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeSum {
    from: usize,
    to: usize,
    sum: f64,
}

#[derive(Serialize, Deserialize)]
struct StatFile {
    num_states: usize,
    num_paths: u64,
    start_counts: Vec<u64>,
    transition_counts: Vec<Vec<u64>>,
    visit_counts: Vec<u64>,
    #[serde(default)]
    reward_sums: Vec<EdgeSum>,
    #[serde(default)]
    reward_events: Vec<EdgeEvents>,
}

impl From<&SuffStat> for StatFile {
    fn from(stat: &SuffStat) -> Self {
        let n = stat.num_states;
        let mut reward_sums = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if stat.transition_counts[i][j] > 0 {
                    reward_sums.push(EdgeSum { from: i, to: j, sum: stat.reward_sums[i][j] });
                }
            }
        }
        StatFile {
            num_states: n,
            num_paths: stat.num_paths,
            start_counts: stat.start_counts.clone(),
            transition_counts: stat.transition_counts.clone(),
            visit_counts: stat.visit_counts.clone(),
            reward_sums,
            reward_events: stat
                .reward_event_counts
                .iter()
                .map(|(&(from, to), c)| EdgeEvents { from, to, counts: c.clone() })
                .collect(),
        }
    }
}

impl StatFile {
    fn into_stat(self) -> Result<SuffStat> {
        let n = self.num_states;
        let mut stat = SuffStat::new(n);
        stat.num_paths = self.num_paths;
        stat.start_counts = self.start_counts;
        stat.transition_counts = self.transition_counts;
        stat.visit_counts = self.visit_counts;
        for e in self.reward_sums {
            if e.from >= n || e.to >= n {
                return Err(MrpError::InvalidStatistic(format!("edge {}->{} out of range", e.from, e.to)));
            }
            stat.reward_sums[e.from][e.to] = e.sum;
        }
        for e in self.reward_events {
            if stat.reward_event_counts.insert((e.from, e.to), e.counts).is_some() {
                return Err(MrpError::InvalidStatistic(format!(
                    "edge {}->{} listed twice",
                    e.from, e.to
                )));
            }
        }
        // a statistic written by hand may omit events on deterministic edges
        for i in 0..n.min(stat.transition_counts.len()) {
            for j in 0..n.min(stat.transition_counts[i].len()) {
                let mu = stat.transition_counts[i][j];
                if mu > 0 {
                    stat.reward_event_counts.entry((i, j)).or_insert_with(|| vec![mu]);
                }
            }
        }
        Ok(stat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, TwoStateReward};

    #[test]
    fn counts_of_a_cycling_path() {
        let spec = catalog::two_state(0.5, 1.0, TwoStateReward::Cycle);
        let path = PathSample::deterministic(&spec, &[0, 0, 0, 1]).unwrap();
        let stat = SuffStat::from_paths(&spec, [&path]).unwrap();
        assert_eq!(stat.transition_counts, vec![vec![2, 1], vec![0, 0]]);
        assert_eq!(stat.visit_counts, vec![3, 1]);
        assert_eq!(stat.reward_sums[0][0], 2.0);
        stat.check(Some(&spec)).unwrap();
    }

    #[test]
    fn json_round_trip_and_event_defaults() {
        let spec = catalog::fork_a([0.5, 0.5]);
        let paths = [
            PathSample::new(vec![0, 1, 3], vec![1.0, -1.0]),
            PathSample::new(vec![1, 2], vec![1.0]),
        ];
        let stat = SuffStat::from_paths(&spec, &paths).unwrap();
        assert_eq!(SuffStat::from_json(&stat.to_json()).unwrap(), stat);

        let text = r#"{"num_states":2,"num_paths":2,"start_counts":[2,0],
            "transition_counts":[[4,2],[0,0]],"visit_counts":[6,2]}"#;
        let stat = SuffStat::from_json(text).unwrap();
        assert_eq!(stat.reward_event_counts[&(0, 0)], vec![4]);
    }

    #[test]
    fn rejects_broken_flow() {
        let text = r#"{"num_states":2,"num_paths":1,"start_counts":[1,0],
            "transition_counts":[[1,1],[0,0]],"visit_counts":[3,1]}"#;
        assert!(matches!(SuffStat::from_json(text), Err(MrpError::InvalidStatistic(_))));
    }

    #[test]
    fn rejects_edges_outside_topology() {
        let spec = catalog::chain(&[1.0], 1.0);
        let path = PathSample::new(vec![0, 0, 1], vec![0.0, 1.0]);
        assert!(SuffStat::from_paths(&spec, [&path]).is_err());
    }
}
