//! Error decomposition of a sample of estimates.

use serde::Serialize;

use crate::error::{MrpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MseDecomposition {
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
}

/// `mse = mean((x - truth)^2)`, `bias = mean(x) - truth`, `variance = mse - bias^2`.
pub fn mse_decompose(estimates: &[f64], truth: f64) -> Result<MseDecomposition> {
    if estimates.is_empty() {
        return Err(MrpError::EmptySample);
    }
    let n = estimates.len() as f64;
    let mse = estimates.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / n;
    let bias = estimates.iter().map(|x| x - truth).sum::<f64>() / n;
    Ok(MseDecomposition { mse, bias, variance: mse - bias * bias })
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(MrpError::EmptySample);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self { mean, std_err: (var / n).sqrt(), count: xs.len() })
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_examples() {
        let d = mse_decompose(&[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!((d.mse, d.bias, d.variance), (0.0, 0.0, 0.0));
        let d = mse_decompose(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!((d.mse, d.bias, d.variance), (1.0, 0.0, 1.0));
        assert!(matches!(mse_decompose(&[], 0.0), Err(MrpError::EmptySample)));
    }
}
