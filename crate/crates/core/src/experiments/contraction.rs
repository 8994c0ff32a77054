use nalgebra::DMatrix;
use rand::distributions::Distribution;
use rand::Rng;

use super::{substream, ExperimentResult, ExperimentRow, RunConfig};
use crate::error::{MrpError, Result};
use crate::format::num;
use crate::model_based::{bellman_apply, iml_update, ml_value, prior_sampler, state_prior, td0_operator_apply};
use crate::stats::MseDecomposition;
use crate::suffstat::MlParams;

/// Operator iteration on random dense models.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionConfig {
    pub size: usize,
    pub gammas: Vec<f64>,
    /// Prior skew values for the random state-wise updates.
    pub cs: Vec<f64>,
    /// Iterations per curve. One state-wise iteration is `size` single-state updates.
    pub iterations: usize,
    pub matrices: usize,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self { size: 100, gammas: vec![0.3, 0.5, 0.7, 0.9], cs: vec![0.0, 0.5, 1.0], iterations: 100, matrices: 20 }
    }
}

fn random_params<R: Rng + ?Sized>(size: usize, rng: &mut R) -> MlParams {
    let mut p = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        let draws: Vec<f64> = (0..size).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = draws.iter().sum();
        for (j, d) in draws.iter().enumerate() {
            p[(i, j)] = d / total;
        }
    }
    let r = DMatrix::from_fn(size, size, |_, _| rng.gen::<f64>());
    MlParams::new(p, r)
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sup-norm distance to the fixed point, relative to the start `V = 0`.
///
/// Estimators: `bellman`, `bellman-bound` (`gamma^k`), `td0` (rate `1/k`),
/// `td0-bound` (`prod_{i<k} (i+gamma)/k!`) and `statewise-c=<c>`. Rows carry
/// the relative distance as `bias`, its square as `mse` and zero variance.
pub fn exp_contraction(cfg: &ContractionConfig, run: &RunConfig) -> Result<ExperimentResult> {
    const EXP: &str = "contraction";
    if cfg.size == 0 || cfg.matrices == 0 {
        return Err(MrpError::InvalidArgument("need a nonempty model and at least one matrix".into()));
    }
    if cfg.gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
        return Err(MrpError::InvalidArgument("contraction needs gamma in (0,1)".into()));
    }
    let priors = cfg.cs.iter().map(|&c| state_prior(cfg.size, c)).collect::<Result<Vec<_>>>()?;
    let mut res = ExperimentResult::default();
    let row = |est: &str, sweep: &str, block: usize, d: f64| {
        ExperimentRow::new(EXP, est, sweep, block, MseDecomposition { mse: d * d, bias: d, variance: 0.0 })
    };
    for block in 0..cfg.matrices {
        let params = random_params(cfg.size, &mut substream(run.seed, 3_000_000, block as u64));
        for (gi, &gamma) in cfg.gammas.iter().enumerate() {
            let fixed = ml_value(&params, gamma);
            let d0 = sup_dist(&vec![0.0; cfg.size], &fixed);
            let rel = |v: &[f64]| if d0 > 0.0 { sup_dist(v, &fixed) / d0 } else { 0.0 };
            let mut bell = vec![0.0; cfg.size];
            let mut td = vec![0.0; cfg.size];
            let mut sw: Vec<Vec<f64>> = vec![vec![0.0; cfg.size]; cfg.cs.len()];
            let samplers = priors.iter().map(|p| prior_sampler(p, cfg.size)).collect::<Result<Vec<_>>>()?;
            let mut rngs: Vec<_> = (0..cfg.cs.len())
                .map(|c| substream(run.seed, 3_100_000 + gi as u64, (block * cfg.cs.len() + c) as u64))
                .collect();
            let mut td_bound = 1.0;
            for k in 1..=cfg.iterations {
                bell = bellman_apply(&bell, &params, gamma)?;
                td = td0_operator_apply(&td, &params, gamma, k as u64)?;
                td_bound *= (k as f64 - 1.0 + gamma) / k as f64;
                let sweep = format!("gamma={};k={k}", num(gamma));
                res.rows.push(row("bellman", &sweep, block, rel(&bell)));
                res.rows.push(row("bellman-bound", &sweep, block, gamma.powi(k as i32)));
                res.rows.push(row("td0", &sweep, block, rel(&td)));
                res.rows.push(row("td0-bound", &sweep, block, td_bound));
                for (ci, c) in cfg.cs.iter().enumerate() {
                    for _ in 0..cfg.size {
                        let s = samplers[ci].sample(&mut rngs[ci]);
                        iml_update(&mut sw[ci], &params, gamma, s)?;
                    }
                    res.rows.push(row(&format!("statewise-c={}", num(*c)), &sweep, block, rel(&sw[ci])));
                }
            }
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bellman_stays_under_its_bound() {
        let cfg = ContractionConfig { size: 20, gammas: vec![0.9], cs: vec![0.5], iterations: 30, matrices: 2 };
        let res = exp_contraction(&cfg, &RunConfig::DESK).unwrap();
        for k in 1..=30 {
            let sweep = format!("gamma=0.9;k={k}");
            for b in 0..2 {
                let get = |e: &str| res.rows.iter().find(|r| r.estimator == e && r.sweep == sweep && r.block == b).unwrap().bias;
                assert!(get("bellman") <= get("bellman-bound") + 1e-12);
                assert!(get("td0") <= get("td0-bound") + 1e-12);
            }
        }
    }
}
