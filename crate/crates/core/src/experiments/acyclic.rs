use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::layered::{gen_layered_acyclic, subgraph_start_states, LayeredConfig};
use super::{block_rows, substream, ExperimentResult, RunConfig};
use crate::error::{MrpError, Result};
use crate::model::{MrpSpec, PathSample, PathSampler};
use crate::model_based::{iml_estimate, ml_value};
use crate::mvu::{mvu_estimate, EnumerationLimits};
use crate::sampled::{mc_first_visit, td_estimate, TdConfig};
use crate::suffstat::SuffStat;

const TARGET: usize = 0;
const MODEL_CELL: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Ml,
    Iml,
    Td,
    Mc,
    Mvu,
}

impl EstimatorKind {
    pub const STANDARD: [EstimatorKind; 4] =
        [EstimatorKind::Ml, EstimatorKind::Iml, EstimatorKind::Td, EstimatorKind::Mc];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ml => "ml",
            EstimatorKind::Iml => "iml",
            EstimatorKind::Td => "td",
            EstimatorKind::Mc => "mc",
            EstimatorKind::Mvu => "mvu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Ml, Self::Iml, Self::Td, Self::Mc, Self::Mvu].into_iter().find(|k| k.name() == name)
    }

    /// Estimate for `state`, `None` when the paths never visit it. TD is
    /// modified TD(0) with per-state harmonic rates.
    pub fn estimate(self, spec: &MrpSpec, paths: &[PathSample], state: usize) -> Result<Option<f64>> {
        let n = spec.num_states;
        let g = spec.gamma;
        Ok(match self {
            EstimatorKind::Ml => {
                let stat = SuffStat::from_paths(spec, paths)?;
                if stat.visit_counts[state] == 0 {
                    None
                } else {
                    Some(ml_value(&stat.ml_params()?, g)[state])
                }
            }
            EstimatorKind::Iml => iml_estimate(n, paths, g).get(state),
            EstimatorKind::Td => td_estimate(n, paths, &TdConfig::default().modified(), g)?.get(state),
            EstimatorKind::Mc => mc_first_visit(n, paths, g).get(state),
            EstimatorKind::Mvu => {
                let stat = SuffStat::from_paths(spec, paths)?;
                if stat.visit_counts[state] == 0 {
                    None
                } else {
                    mvu_estimate(&stat, spec, g, &EnumerationLimits::default())?.get(state)
                }
            }
        })
    }
}

/// Value of a model whose edges all go from lower to higher state indices.
fn forward_acyclic_value(spec: &MrpSpec) -> Vec<f64> {
    let n = spec.num_states;
    let mut v = vec![0.0; n];
    for i in (0..n).rev() {
        if spec.terminal[i] {
            continue;
        }
        v[i] = spec
            .successors(i)
            .map(|j| spec.transitions[i][j] * (spec.reward(i, j).mean() + spec.gamma * v[j]))
            .sum();
    }
    v
}

/// Model and true target value for replicate `r`; shared across sweep cells.
fn replicate_model(layered: &LayeredConfig, seed: u64, r: usize) -> Result<(MrpSpec, f64)> {
    let spec = gen_layered_acyclic(layered, &mut substream(seed, MODEL_CELL, r as u64))?;
    let truth = forward_acyclic_value(&spec)[TARGET];
    Ok((spec, truth))
}

fn check_kinds(kinds: &[EstimatorKind]) -> Result<()> {
    if kinds.is_empty() {
        return Err(MrpError::InvalidArgument("no estimators selected".into()));
    }
    Ok(())
}

/// Runs `paths_for(spec, rng)` per replicate and scores every estimator on the
/// same paths. Returns per-estimator error vectors in replicate order.
fn score_cell<F>(
    layered: &LayeredConfig,
    kinds: &[EstimatorKind],
    run: &RunConfig,
    cell: u64,
    paths_for: F,
) -> Result<Vec<Vec<Option<f64>>>>
where
    F: Fn(&MrpSpec, &mut rand_chacha::ChaCha8Rng) -> Result<Vec<PathSample>> + Sync,
{
    let per_rep: Vec<Vec<Option<f64>>> = (0..run.replicates())
        .into_par_iter()
        .map(|r| {
            let (spec, truth) = replicate_model(layered, run.seed, r)?;
            let mut rng = substream(run.seed, cell, r as u64);
            let paths = paths_for(&spec, &mut rng)?;
            kinds
                .iter()
                .map(|k| Ok(k.estimate(&spec, &paths, TARGET)?.map(|x| x - truth)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..kinds.len()).map(|k| per_rep.iter().map(|row| row[k]).collect()).collect())
}

/// Block MSE of the target value against the number of paths.
pub fn exp_mse_vs_paths(
    layered: &LayeredConfig,
    n_grid: &[usize],
    kinds: &[EstimatorKind],
    run: &RunConfig,
) -> Result<ExperimentResult> {
    check_kinds(kinds)?;
    let mut res = ExperimentResult::default();
    for &n in n_grid {
        let errs = score_cell(layered, kinds, run, n as u64, |spec, rng| {
            PathSampler::new(spec).sample_many(n, rng)
        })?;
        for (k, e) in kinds.iter().zip(&errs) {
            res.rows.extend(block_rows("mse-vs-paths", k.name(), &n.to_string(), e, run, 0.0));
        }
    }
    Ok(res)
}

/// Number of paths started inside the subgraph at grid point `x`:
/// 0 for `x = 0`, otherwise `10 * 2^(x-1)`.
pub fn subgraph_starts_for(x: u32) -> usize {
    if x == 0 {
        0
    } else {
        10usize << (x - 1)
    }
}

/// Block MSE of the target value with `target_starts` paths started at the
/// target and a growing number started uniformly in the start layers.
pub fn exp_mse_vs_startprob(
    layered: &LayeredConfig,
    x_grid: &[u32],
    target_starts: usize,
    kinds: &[EstimatorKind],
    run: &RunConfig,
) -> Result<ExperimentResult> {
    check_kinds(kinds)?;
    let mut res = ExperimentResult::default();
    for &x in x_grid {
        let k = subgraph_starts_for(x);
        let errs = score_cell(layered, kinds, run, 1_000_000 + x as u64, |spec, rng| {
            let others = subgraph_start_states(spec);
            if k > 0 && others.is_empty() {
                return Err(MrpError::InvalidArgument("model has no subgraph start states".into()));
            }
            let mut starts = vec![TARGET; target_starts];
            starts.extend((0..k).map(|_| others[rng.gen_range(0..others.len())]));
            starts.shuffle(rng);
            let sampler = PathSampler::new(spec);
            starts.into_iter().map(|s| sampler.sample_from(s, rng)).collect()
        })?;
        for (kind, e) in kinds.iter().zip(&errs) {
            res.rows.extend(block_rows("mse-vs-startprob", kind.name(), &x.to_string(), e, run, 0.0));
        }
    }
    Ok(res)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeConfig {
    /// Synthetic cost in seconds charged per observed path.
    pub per_path_cost: f64,
    /// Timing repetitions; the median is reported.
    pub repetitions: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { per_path_cost: 1.0, repetitions: 5 }
    }
}

/// MSE against compute time. Rows tagged `mse-vs-time` carry the median
/// per-replicate wall time of the estimator alone; rows tagged
/// `mse-vs-time-cost` add `per_path_cost * n`. Timing runs single-threaded.
pub fn exp_mse_vs_time(
    layered: &LayeredConfig,
    n_grid: &[usize],
    kinds: &[EstimatorKind],
    run: &RunConfig,
    time: &TimeConfig,
) -> Result<ExperimentResult> {
    check_kinds(kinds)?;
    if time.repetitions == 0 || !(time.per_path_cost >= 0.0) {
        return Err(MrpError::InvalidArgument("need at least one timing repetition and a nonnegative cost".into()));
    }
    let models: Vec<(MrpSpec, f64)> = (0..run.replicates())
        .into_par_iter()
        .map(|r| replicate_model(layered, run.seed, r))
        .collect::<Result<_>>()?;
    let mut res = ExperimentResult::default();
    for &n in n_grid {
        let cell = 2_000_000 + n as u64;
        let path_sets: Vec<Vec<PathSample>> = models
            .par_iter()
            .enumerate()
            .map(|(r, (spec, _))| PathSampler::new(spec).sample_many(n, &mut substream(run.seed, cell, r as u64)))
            .collect::<Result<_>>()?;
        for &kind in kinds {
            let mut errs = Vec::new();
            let mut times = Vec::with_capacity(time.repetitions);
            for rep in 0..time.repetitions {
                let start = Instant::now();
                let mut out = Vec::with_capacity(models.len());
                for ((spec, truth), paths) in models.iter().zip(&path_sets) {
                    out.push(kind.estimate(spec, paths, TARGET)?.map(|x| x - truth));
                }
                times.push(start.elapsed().as_secs_f64() / models.len().max(1) as f64);
                if rep == 0 {
                    errs = out;
                }
            }
            times.sort_by(f64::total_cmp);
            let wall = times[times.len() / 2];
            let sweep = n.to_string();
            for mut row in block_rows("mse-vs-time", kind.name(), &sweep, &errs, run, 0.0) {
                row.time_s = wall;
                let mut costed = row.clone();
                costed.experiment = "mse-vs-time-cost".into();
                costed.time_s = wall + time.per_path_cost * n as f64;
                res.rows.push(row);
                res.rows.push(costed);
            }
        }
    }
    Ok(res)
}

/// First time at which a curve of `(time, mse)` points reaches `threshold`,
/// interpolating log-MSE linearly in log-time between grid points.
pub fn time_to_threshold(points: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let first = points.first()?;
    if first.1 <= threshold {
        return Some(first.0);
    }
    for w in points.windows(2) {
        let (t0, m0) = w[0];
        let (t1, m1) = w[1];
        if m1 <= threshold {
            if !(m0 > 0.0 && m1 > 0.0 && t0 > 0.0 && t1 > 0.0) {
                return Some(t1);
            }
            let f = (threshold.ln() - m0.ln()) / (m1.ln() - m0.ln());
            return Some((t0.ln() + f * (t1.ln() - t0.ln())).exp());
        }
    }
    None
}
