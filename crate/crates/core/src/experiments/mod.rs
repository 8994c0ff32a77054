//! Simulation studies: MSE curves on layered acyclic MRPs, the two-state
//! MVU/ML comparison and operator contraction rates.

mod acyclic;
mod contraction;
mod cyclic;
mod layered;

pub use acyclic::{
    exp_mse_vs_paths, exp_mse_vs_startprob, exp_mse_vs_time, subgraph_starts_for, time_to_threshold,
    EstimatorKind, TimeConfig,
};
pub use contraction::{exp_contraction, ContractionConfig};
pub use cyclic::{exp_cyclic_ml_bias, exp_cyclic_mvu_ml, mse_difference, CyclicConfig};
pub use layered::{gen_layered_acyclic, subgraph_start_states, LayeredConfig};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::format::num;
use crate::stats::{mse_decompose, MseDecomposition};

pub const CSV_HEADER: &str = "experiment,estimator,sweep,block,mse,bias,variance,time_s";

/// Replicate layout shared by the simulation studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub blocks: usize,
    pub replicates_per_block: usize,
    pub seed: u64,
}

impl RunConfig {
    pub const DESK: RunConfig = RunConfig { blocks: 30, replicates_per_block: 300, seed: 0 };

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn replicates(&self) -> usize {
        self.blocks * self.replicates_per_block
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::DESK
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for replicate `replicate` of sweep cell `cell`.
pub fn substream(seed: u64, cell: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(cell)));
    rng.set_stream(replicate);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub experiment: String,
    pub estimator: String,
    pub sweep: String,
    pub block: usize,
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
    pub time_s: f64,
}

impl ExperimentRow {
    pub fn new(experiment: &str, estimator: &str, sweep: &str, block: usize, d: MseDecomposition) -> Self {
        Self {
            experiment: experiment.into(),
            estimator: estimator.into(),
            sweep: sweep.into(),
            block,
            mse: d.mse,
            bias: d.bias,
            variance: d.variance,
            time_s: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    pub fn extend(&mut self, other: ExperimentResult) {
        self.rows.extend(other.rows);
    }

    pub fn select<'a>(
        &'a self,
        estimator: &'a str,
        sweep: &'a str,
    ) -> impl Iterator<Item = &'a ExperimentRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == estimator && r.sweep == sweep)
    }

    /// Mean over blocks of one column, with the standard error of that mean.
    pub fn block_mean(
        &self,
        estimator: &str,
        sweep: &str,
        column: impl Fn(&ExperimentRow) -> f64,
    ) -> Option<(f64, f64)> {
        let xs: Vec<f64> = self.select(estimator, sweep).map(column).collect();
        crate::stats::MeanEstimate::of(&xs).ok().map(|m| (m.mean, m.std_err))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.experiment,
                r.estimator,
                r.sweep,
                r.block,
                num(r.mse),
                num(r.bias),
                num(r.variance),
                num(r.time_s)
            );
        }
        out
    }

    /// One whitespace-separated file per (experiment, estimator) with block
    /// means: `sweep mse mse_sd bias time_s`. Returns the written paths.
    pub fn write_gnuplot(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.experiment.clone(), r.estimator.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut written = Vec::new();
        for (exp, est) in keys {
            let mut sweeps: Vec<&str> = Vec::new();
            for r in self.rows.iter().filter(|r| r.experiment == exp && r.estimator == est) {
                if !sweeps.contains(&r.sweep.as_str()) {
                    sweeps.push(&r.sweep);
                }
            }
            let mut text = String::from("# sweep mse mse_sd bias time_s\n");
            for sweep in sweeps {
                let rows: Vec<&ExperimentRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.experiment == exp && r.estimator == est && r.sweep == sweep)
                    .collect();
                let k = rows.len() as f64;
                let mse = rows.iter().map(|r| r.mse).sum::<f64>() / k;
                let sd = if rows.len() > 1 {
                    (rows.iter().map(|r| (r.mse - mse).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
                } else {
                    0.0
                };
                let bias = rows.iter().map(|r| r.bias).sum::<f64>() / k;
                let time = rows.iter().map(|r| r.time_s).sum::<f64>() / k;
                let _ = writeln!(text, "{sweep} {} {} {} {}", num(mse), num(sd), num(bias), num(time));
            }
            let path = dir.join(format!("{exp}.{est}.dat"));
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Splits per-replicate estimates (undefined ones dropped) into blocks and
/// decomposes each block's error.
pub(crate) fn block_rows(
    experiment: &str,
    estimator: &str,
    sweep: &str,
    per_replicate: &[Option<f64>],
    run: &RunConfig,
    truth: f64,
) -> Vec<ExperimentRow> {
    per_replicate
        .chunks(run.replicates_per_block.max(1))
        .enumerate()
        .filter_map(|(b, chunk)| {
            let xs: Vec<f64> = chunk.iter().flatten().copied().collect();
            mse_decompose(&xs, truth).ok().map(|d| ExperimentRow::new(experiment, estimator, sweep, b, d))
        })
        .collect()
}
