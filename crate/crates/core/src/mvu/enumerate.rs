//! Backtracking decomposition of a count statistic into path multisets.
//!
//! Paths are generated in non-decreasing lexicographic order of their token
//! sequences (start state, then edge ids), so each multiset is produced once.

use std::time::Instant;

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{MrpError, Result};
use crate::model::{MrpSpec, PathSample};
use crate::suffstat::SuffStat;

pub const DEFAULT_MAX_MULTISETS: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerationLimits {
    pub max_multisets: u64,
    pub max_seconds: Option<f64>,
    /// Split the search at the first path and run branches on the rayon pool.
    pub parallel: bool,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { max_multisets: DEFAULT_MAX_MULTISETS, max_seconds: None, parallel: false }
    }
}

/// One labelled edge of the count multigraph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Edge {
    pub from: usize,
    pub to: usize,
    pub reward: f64,
}

/// The multigraph to decompose.
pub(crate) struct Problem {
    pub num_states: usize,
    pub num_paths: usize,
    pub edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    terminal: Vec<bool>,
    counts: Vec<u64>,
    starts: Vec<u64>,
    ln_fact: Vec<f64>,
}

impl Problem {
    pub fn new(stat: &SuffStat, spec: &MrpSpec) -> Result<Self> {
        stat.check(Some(spec)).map_err(|e| MrpError::Infeasible(e.to_string()))?;
        let n = stat.num_states;
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        let mut out = vec![Vec::new(); n];
        // BTreeMap order is (from, to); outcomes follow in support order
        for (&(i, j), events) in &stat.reward_event_counts {
            let model = spec.reward(i, j);
            for (k, &c) in events.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                out[i].push(edges.len());
                edges.push(Edge { from: i, to: j, reward: model.outcome_value(k).unwrap_or(0.0) });
                counts.push(c);
            }
        }
        let num_paths = usize::try_from(stat.num_paths)
            .map_err(|_| MrpError::ResourceCap("path count does not fit in memory".into()))?;
        let ln_fact = (0..=num_paths)
            .scan(0.0f64, |acc, k| {
                if k > 0 {
                    *acc += (k as f64).ln();
                }
                Some(*acc)
            })
            .collect();
        Ok(Self {
            num_states: n,
            num_paths,
            edges,
            out,
            terminal: spec.terminal.clone(),
            counts,
            starts: stat.start_counts.clone(),
            ln_fact,
        })
    }

    /// States and rewards of a token path.
    pub fn to_sample(&self, tokens: &[usize]) -> PathSample {
        let mut states = vec![tokens[0]];
        let mut rewards = Vec::with_capacity(tokens.len() - 1);
        for &e in &tokens[1..] {
            states.push(self.edges[e].to);
            rewards.push(self.edges[e].reward);
        }
        PathSample::new(states, rewards)
    }
}

/// Receives each multiset as runs of identical paths (sorted), with the
/// natural log of its number of orderings.
pub(crate) trait Sink: Send {
    fn visit(&mut self, problem: &Problem, runs: &[(&[usize], u64)], ln_mult: f64);
    fn absorb(&mut self, other: Self);
}

struct Search<'p, S> {
    problem: &'p Problem,
    counts: Vec<u64>,
    starts: Vec<u64>,
    paths: Vec<Vec<usize>>,
    remaining: u64,
    sink: S,
    /// Stop after the first completed path and record the branch instead.
    split: Option<Vec<Branch>>,
    guard: &'p Guard,
}

struct Branch {
    path: Vec<usize>,
    counts: Vec<u64>,
    starts: Vec<u64>,
    remaining: u64,
}

struct Guard {
    start: Instant,
    max_seconds: Option<f64>,
    max_multisets: u64,
    emitted: std::sync::atomic::AtomicU64,
    nodes: std::sync::atomic::AtomicU64,
}

impl Guard {
    fn tick(&self) -> Result<()> {
        use std::sync::atomic::Ordering;
        let nodes = self.nodes.fetch_add(1, Ordering::Relaxed);
        if nodes.is_multiple_of(4096) {
            if let Some(limit) = self.max_seconds {
                if self.start.elapsed().as_secs_f64() > limit {
                    return Err(MrpError::ResourceCap(format!("enumeration exceeded {limit} s")));
                }
            }
        }
        Ok(())
    }

    fn emit(&self) -> Result<()> {
        use std::sync::atomic::Ordering;
        let k = self.emitted.fetch_add(1, Ordering::Relaxed) + 1;
        if k > self.max_multisets {
            return Err(MrpError::ResourceCap(format!(
                "more than {} consistent path multisets",
                self.max_multisets
            )));
        }
        Ok(())
    }
}

impl<'p, S: Sink> Search<'p, S> {
    fn next_path(&mut self) -> Result<()> {
        if self.paths.len() == self.problem.num_paths {
            if self.remaining == 0 {
                self.emit()?;
            }
            return Ok(());
        }
        let (first, tight) = match self.paths.last() {
            Some(prev) => (prev[0], true),
            None => (0, false),
        };
        for s in first..self.problem.num_states {
            if self.starts[s] == 0 {
                continue;
            }
            self.starts[s] -= 1;
            let mut cur = vec![s];
            let r = self.walk(&mut cur, s, tight && s == first);
            self.starts[s] += 1;
            r?;
        }
        Ok(())
    }

    fn walk(&mut self, cur: &mut Vec<usize>, state: usize, tight: bool) -> Result<()> {
        self.guard.tick()?;
        if self.problem.terminal[state] {
            return self.path_done(cur);
        }
        let pos = cur.len();
        let floor = if tight { self.paths.last().map(|p| p[pos]) } else { None };
        for &e in &self.problem.out[state] {
            if self.counts[e] == 0 || floor.is_some_and(|f| e < f) {
                continue;
            }
            self.counts[e] -= 1;
            self.remaining -= 1;
            cur.push(e);
            let r = self.walk(cur, self.problem.edges[e].to, tight && floor == Some(e));
            cur.pop();
            self.counts[e] += 1;
            self.remaining += 1;
            r?;
        }
        Ok(())
    }

    fn path_done(&mut self, cur: &[usize]) -> Result<()> {
        let left = self.problem.num_paths - self.paths.len() - 1;
        if left == 0 {
            if self.remaining != 0 {
                return Ok(());
            }
        } else if !self.reachable() {
            return Ok(());
        }
        if let Some(branches) = self.split.as_mut() {
            branches.push(Branch {
                path: cur.to_vec(),
                counts: self.counts.clone(),
                starts: self.starts.clone(),
                remaining: self.remaining,
            });
            return Ok(());
        }
        self.paths.push(cur.to_vec());
        let r = self.next_path();
        self.paths.pop();
        r
    }

    /// Every edge with remaining count is reachable from a remaining start.
    fn reachable(&self) -> bool {
        let p = self.problem;
        let mut seen = vec![false; p.num_states];
        let mut stack: Vec<usize> = (0..p.num_states).filter(|&s| self.starts[s] > 0).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(u) = stack.pop() {
            for &e in &p.out[u] {
                let v = p.edges[e].to;
                if self.counts[e] > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        p.edges.iter().zip(&self.counts).all(|(e, &c)| c == 0 || seen[e.from])
    }

    fn emit(&mut self) -> Result<()> {
        self.guard.emit()?;
        let p = self.problem;
        let mut runs: Vec<(&[usize], u64)> = Vec::new();
        for path in &self.paths {
            match runs.last_mut() {
                Some((last, c)) if *last == path.as_slice() => *c += 1,
                _ => runs.push((path.as_slice(), 1)),
            }
        }
        let ln_mult =
            p.ln_fact[p.num_paths] - runs.iter().map(|(_, c)| p.ln_fact[*c as usize]).sum::<f64>();
        self.sink.visit(p, &runs, ln_mult);
        Ok(())
    }
}

/// Visits every consistent multiset.
pub(crate) fn search<S, F>(problem: &Problem, limits: &EnumerationLimits, make_sink: F) -> Result<S>
where
    S: Sink,
    F: Fn() -> S + Sync,
{
    let guard = Guard {
        start: Instant::now(),
        max_seconds: limits.max_seconds,
        max_multisets: limits.max_multisets,
        emitted: 0.into(),
        nodes: 0.into(),
    };
    let fresh = |split| Search {
        problem,
        counts: problem.counts.clone(),
        starts: problem.starts.clone(),
        paths: Vec::new(),
        remaining: problem.counts.iter().sum(),
        sink: make_sink(),
        split,
        guard: &guard,
    };
    if problem.num_paths == 0 {
        return Err(MrpError::NoData);
    }
    let sink = if limits.parallel && problem.num_paths > 1 {
        let mut root = fresh(Some(Vec::new()));
        root.next_path()?;
        let branches = root.split.take().unwrap_or_default();
        let parts: Vec<Result<S>> = branches
            .into_par_iter()
            .map(|b| {
                let mut s = Search {
                    problem,
                    counts: b.counts,
                    starts: b.starts,
                    paths: vec![b.path],
                    remaining: b.remaining,
                    sink: make_sink(),
                    split: None,
                    guard: &guard,
                };
                s.next_path()?;
                Ok(s.sink)
            })
            .collect();
        let mut acc = make_sink();
        for part in parts {
            acc.absorb(part?);
        }
        acc
    } else {
        let mut root = fresh(None);
        root.next_path()?;
        root.sink
    };
    if guard.emitted.load(std::sync::atomic::Ordering::Relaxed) == 0 {
        return Err(MrpError::Infeasible("no consistent decomposition".into()));
    }
    Ok(sink)
}

/// A multiset of paths with its number of distinct orderings.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMultiset {
    /// Distinct paths in canonical order with their repeat counts.
    pub paths: Vec<(PathSample, u64)>,
    pub arrangements: BigUint,
}

/// All path multisets reproducing a statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistentFamily {
    pub multisets: Vec<PathMultiset>,
    /// Number of ordered path vectors, the sum of all arrangements.
    pub total_ordered_count: BigUint,
}

impl ConsistentFamily {
    /// Every ordered path vector, multisets in canonical order.
    pub fn ordered_vectors(&self) -> Vec<Vec<PathSample>> {
        let mut out = Vec::new();
        for m in &self.multisets {
            let items: Vec<&PathSample> =
                m.paths.iter().flat_map(|(p, c)| std::iter::repeat_n(p, *c as usize)).collect();
            permutations_distinct(&items, &mut Vec::new(), &mut vec![false; items.len()], &mut out);
        }
        out
    }
}

fn permutations_distinct(
    items: &[&PathSample],
    cur: &mut Vec<PathSample>,
    used: &mut Vec<bool>,
    out: &mut Vec<Vec<PathSample>>,
) {
    if cur.len() == items.len() {
        out.push(cur.clone());
        return;
    }
    for i in 0..items.len() {
        // items are grouped, so skip a copy whose twin to the left is unused
        if used[i] || (i > 0 && items[i] == items[i - 1] && !used[i - 1]) {
            continue;
        }
        used[i] = true;
        cur.push(items[i].clone());
        permutations_distinct(items, cur, used, out);
        cur.pop();
        used[i] = false;
    }
}

fn factorial(k: u64) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * i)
}

struct Collector {
    multisets: Vec<PathMultiset>,
    total: BigUint,
}

impl Sink for Collector {
    fn visit(&mut self, problem: &Problem, runs: &[(&[usize], u64)], _ln_mult: f64) {
        let mut arrangements = factorial(problem.num_paths as u64);
        for (_, c) in runs {
            arrangements /= factorial(*c);
        }
        self.total += &arrangements;
        self.multisets.push(PathMultiset {
            paths: runs.iter().map(|(t, c)| (problem.to_sample(t), *c)).collect(),
            arrangements,
        });
    }

    fn absorb(&mut self, other: Self) {
        self.multisets.extend(other.multisets);
        self.total += other.total;
    }
}

/// Enumerates the path multisets whose counts, starts and reward events equal `stat`.
pub fn enumerate_consistent(
    stat: &SuffStat,
    spec: &MrpSpec,
    limits: &EnumerationLimits,
) -> Result<ConsistentFamily> {
    let problem = Problem::new(stat, spec)?;
    let c = search(&problem, limits, || Collector { multisets: Vec::new(), total: BigUint::default() })?;
    Ok(ConsistentFamily { multisets: c.multisets, total_ordered_count: c.total })
}
