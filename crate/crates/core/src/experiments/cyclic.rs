use rayon::prelude::*;

use super::{block_rows, substream, ExperimentResult, ExperimentRow, RunConfig};
use crate::catalog::{two_state, TwoStateReward};
use crate::error::{MrpError, Result};
use crate::format::num;
use crate::model::PathSampler;
use crate::model_based::ml_value;
use crate::mvu::{ml_two_state_bias, ml_two_state_mse, mvu_two_state_closed, mvu_two_state_mse};
use crate::sampled::mc_first_visit;
use crate::stats::MseDecomposition;
use crate::suffstat::SuffStat;

#[derive(Clone, Debug, PartialEq)]
pub struct CyclicConfig {
    pub p_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reward: TwoStateReward,
}

impl Default for CyclicConfig {
    fn default() -> Self {
        Self {
            p_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9, 0.99],
            gamma_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            n_grid: vec![10],
            reward: TwoStateReward::Cycle,
        }
    }
}

fn sweep_label(p: f64, gamma: f64, n: usize) -> String {
    format!("p={};gamma={};n={}", num(p), num(gamma), n)
}

/// Errors of ML, MVU and first-visit MC for state 0 on `n` paths, per replicate.
fn cyclic_errors(
    p: f64,
    gamma: f64,
    n: usize,
    reward: TwoStateReward,
    run: &RunConfig,
    cell: u64,
) -> Result<[Vec<Option<f64>>; 3]> {
    if n == 0 {
        return Err(MrpError::InvalidArgument("need at least one path".into()));
    }
    let spec = two_state(p, gamma, reward);
    spec.check()?;
    let truth = spec.exact_value()?[0];
    let sampler = PathSampler::new(&spec);
    let per_rep: Vec<[f64; 3]> = (0..run.replicates())
        .into_par_iter()
        .map(|r| {
            let paths = sampler.sample_many(n, &mut substream(run.seed, cell, r as u64))?;
            let cycles: u64 = paths.iter().map(|x| (x.len() - 2) as u64).sum();
            let cycle_mvu = mvu_two_state_closed(cycles, n as u64, gamma)?;
            let mvu = match reward {
                TwoStateReward::Cycle => cycle_mvu,
                TwoStateReward::Exit => 1.0 - (1.0 - gamma) * cycle_mvu,
            };
            let stat = SuffStat::from_paths(&spec, &paths)?;
            let ml = ml_value(&stat.ml_params()?, gamma)[0];
            let mc = mc_first_visit(2, &paths, gamma).values[0];
            Ok([ml - truth, mvu - truth, mc - truth])
        })
        .collect::<Result<_>>()?;
    Ok([0, 1, 2].map(|k| per_rep.iter().map(|e| Some(e[k])).collect()))
}

fn push_cell(
    res: &mut ExperimentResult,
    experiment: &str,
    sweep: &str,
    errs: &[Vec<Option<f64>>; 3],
    run: &RunConfig,
) {
    let ml = block_rows(experiment, "ml", sweep, &errs[0], run, 0.0);
    let mvu = block_rows(experiment, "mvu", sweep, &errs[1], run, 0.0);
    let diff: Vec<ExperimentRow> = ml
        .iter()
        .zip(&mvu)
        .map(|(a, b)| {
            let d = a.mse - b.mse;
            ExperimentRow::new(experiment, "ml-mvu-diff", sweep, a.block, MseDecomposition { mse: d, bias: 0.0, variance: d })
        })
        .collect();
    res.rows.extend(ml);
    res.rows.extend(mvu);
    res.rows.extend(block_rows(experiment, "mc", sweep, &errs[2], run, 0.0));
    res.rows.extend(diff);
}

/// ML against MVU on the two-state cycle over a grid of `p`, `gamma` and `n`.
///
/// Rows `ml-mvu-diff` hold the per-block MSE difference. At `n = 1` the rows
/// `mvu-analytic-exit` and `ml-analytic-exit` (the latter only when
/// `1/(1-gamma)` is an integer) give exact values for the exit reward variant,
/// whichever variant is simulated.
pub fn exp_cyclic_mvu_ml(cfg: &CyclicConfig, run: &RunConfig) -> Result<ExperimentResult> {
    const EXP: &str = "cyclic-mvu-ml";
    let mut res = ExperimentResult::default();
    let mut cell = 0u64;
    for &p in &cfg.p_grid {
        for &gamma in &cfg.gamma_grid {
            for &n in &cfg.n_grid {
                cell += 1;
                let sweep = sweep_label(p, gamma, n);
                let errs = cyclic_errors(p, gamma, n, cfg.reward, run, cell)?;
                push_cell(&mut res, EXP, &sweep, &errs, run);
                if n == 1 && gamma < 1.0 {
                    let mse = mvu_two_state_mse(p, gamma);
                    let d = MseDecomposition { mse, bias: 0.0, variance: mse };
                    res.rows.push(ExperimentRow::new(EXP, "mvu-analytic-exit", &sweep, 0, d));
                    let m = 1.0 / (1.0 - gamma);
                    if (m - m.round()).abs() < 1e-9 && m.round() >= 2.0 {
                        let m = m.round() as u32;
                        let mse = ml_two_state_mse(p, m)?;
                        let bias = ml_two_state_bias(p, m)?;
                        let d = MseDecomposition { mse, bias, variance: mse - bias * bias };
                        res.rows.push(ExperimentRow::new(EXP, "ml-analytic-exit", &sweep, 0, d));
                    }
                }
            }
        }
    }
    Ok(res)
}

/// ML, MVU and MC error against the number of paths at fixed `p` and `gamma`.
pub fn exp_cyclic_ml_bias(
    p: f64,
    gamma: f64,
    n_grid: &[usize],
    reward: TwoStateReward,
    run: &RunConfig,
) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::default();
    for &n in n_grid {
        let errs = cyclic_errors(p, gamma, n, reward, run, 10_000 + n as u64)?;
        push_cell(&mut res, "cyclic-ml-bias", &n.to_string(), &errs, run);
    }
    Ok(res)
}

/// Mean over blocks of `MSE(ML) - MSE(MVU)` for one sweep cell.
pub fn mse_difference(result: &ExperimentResult, sweep: &str) -> Option<f64> {
    result.block_mean("ml-mvu-diff", sweep, |r| r.mse).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_variant_mvu_is_unbiased_at_one_path() {
        let run = RunConfig { blocks: 4, replicates_per_block: 20000, seed: 5 };
        let res = exp_cyclic_ml_bias(0.5, 0.5, &[1], TwoStateReward::Exit, &run).unwrap();
        let (bias, se) = res.block_mean("mvu", "1", |r| r.bias).unwrap();
        assert!(bias.abs() < 4.0 * se + 1e-3, "bias {bias} se {se}");
    }
}
