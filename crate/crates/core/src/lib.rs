//! Value estimation for Markov reward processes from sampled paths.
//!
//! Sample-based estimators (Monte Carlo, TD(λ)) live in [`sampled`];
//! model-based ones (ML, LSTD, incremental ML) in [`model_based`]; the
//! minimum-variance unbiased estimator in [`mvu`].

pub mod catalog;
pub mod error;
pub mod experiments;
pub mod format;
mod linalg;
pub mod model;
pub mod model_based;
pub mod mvu;
pub mod sampled;
pub mod stats;
pub mod suffstat;

pub use error::{MrpError, Result};
pub use model::{MrpSpec, PathSample, PathSampler, RewardModel, Violation};
pub use model_based::{ml_estimate, ml_value, lstd_value};
pub use mvu::{enumerate_consistent, mvu_estimate, EnumerationLimits};
pub use sampled::{mc_every_visit, mc_first_visit, td_estimate, Estimate, TdConfig};
pub use stats::{mse_decompose, MseDecomposition};
pub use suffstat::{MlParams, SuffStat};
