//! Closed forms for the two-state cycle: the MVU estimate and the n = 1 MSEs.

use crate::error::{MrpError, Result};

/// `C(a, b)` exactly, for `a <= 64`.
fn binomial_u128(a: u64, b: u64) -> u128 {
    let b = b.min(a - b);
    let mut c: u128 = 1;
    for i in 1..=b as u128 {
        c = c * (a as u128 - b as u128 + i) / i;
    }
    c
}

/// `t_i = C(s+n-2-i, n-2) / C(s+n-1, n-1)` for `i = 0..=s` and `n >= 2`:
/// the probability that a given path holds `i` of the `s` cycles.
fn cycle_share(s: u64, n: u64) -> Vec<f64> {
    if s + n <= 64 {
        let norm = binomial_u128(s + n - 1, n - 1) as f64;
        return (0..=s).map(|i| binomial_u128(s + n - 2 - i, n - 2) as f64 / norm).collect();
    }
    // C(m-1, k) / C(m, k) = (m-k)/m
    let k = (n - 2) as f64;
    let mut t = Vec::with_capacity(s as usize + 1);
    let mut cur = (n - 1) as f64 / (s + n - 1) as f64;
    t.push(cur);
    for i in 0..s {
        let m = (s + n - 2 - i) as f64;
        cur *= (m - k) / m;
        t.push(cur);
    }
    t
}

/// MVU estimate of state 1 on the two-state cycle (`R11 = 1`, `R12 = 0`)
/// from `n` paths holding `s` cycles in total.
pub fn mvu_two_state_closed(s: u64, n: u64, gamma: f64) -> Result<f64> {
    if n == 0 {
        return Err(MrpError::InvalidArgument("need at least one path".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(MrpError::InvalidArgument(format!("gamma {gamma} outside (0,1]")));
    }
    if gamma == 1.0 {
        return Ok(s as f64 / n as f64);
    }
    if n == 1 {
        return Ok((1.0 - gamma.powi(s as i32)) / (1.0 - gamma));
    }
    // sum_i t_i (1 - gamma^i)/(1 - gamma), with the geometric sums built up
    // incrementally so nothing cancels
    let mut geo = 0.0;
    let mut acc = 0.0;
    for t in cycle_share(s, n) {
        acc += t * geo;
        geo = 1.0 + gamma * geo;
    }
    Ok(acc)
}

/// MSE at `n = 1` of the MVU (equal to first-visit MC) on the two-state cycle
/// with the exit reward (`R11 = 0`, `R12 = 1`).
pub fn mvu_two_state_mse(p: f64, gamma: f64) -> f64 {
    p * (1.0 - p) * (1.0 - gamma).powi(2)
        / ((1.0 - gamma * p).powi(2) * (1.0 - gamma * gamma * p))
}

/// `(E[X], E[X^2], V)` for the n = 1 ML estimate `X = m/(m+i)` on the exit
/// reward variant with `gamma = 1 - 1/m`.
fn ml_two_state_moments(p: f64, m: u32) -> Result<(f64, f64, f64)> {
    if !(p > 0.0 && p < 1.0) || m < 2 {
        return Err(MrpError::InvalidArgument(format!("need p in (0,1) and m >= 2, got p={p}, m={m}")));
    }
    let mf = m as f64;
    let truth = mf * (1.0 - p) / (mf * (1.0 - p) + p);
    let head_ln: f64 = (1..m).map(|j| p.powi(j as i32) / j as f64).sum();
    let head_li: f64 = (1..m).map(|j| p.powi(j as i32) / (j as f64).powi(2)).sum();
    let pm = p.powi(m as i32);
    let mean = mf * (1.0 - p) / pm * ((1.0 / (1.0 - p)).ln() - head_ln);
    let second = mf * mf * (1.0 - p) / pm * (dilogarithm(p) - head_li);
    Ok((mean, second, truth))
}

/// MSE at `n = 1` of the ML estimate `m/(m+i)` on the two-state cycle with the
/// exit reward, where `gamma = 1 - 1/m`.
pub fn ml_two_state_mse(p: f64, m: u32) -> Result<f64> {
    let (mean, second, truth) = ml_two_state_moments(p, m)?;
    Ok(second - 2.0 * truth * mean + truth * truth)
}

/// Bias at `n = 1` of the same estimate.
pub fn ml_two_state_bias(p: f64, m: u32) -> Result<f64> {
    let (mean, _, truth) = ml_two_state_moments(p, m)?;
    Ok(mean - truth)
}

/// `Li2(p) = sum_{k>=1} p^k / k^2` on `[0, 1]`.
pub fn dilogarithm(p: f64) -> f64 {
    const PI2_6: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return PI2_6;
    }
    if p > 0.5 {
        return PI2_6 - p.ln() * (1.0 - p).ln() - dilogarithm(1.0 - p);
    }
    let mut sum = 0.0;
    let mut pk = p;
    let mut k = 1.0f64;
    while pk > 1e-18 * k * k {
        sum += pk / (k * k);
        pk *= p;
        k += 1.0;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        assert_eq!(mvu_two_state_closed(6, 4, 1.0).unwrap(), 1.5);
        for n in 1..5 {
            assert_eq!(mvu_two_state_closed(0, n, 0.4).unwrap(), 0.0);
        }
        assert!(mvu_two_state_closed(3, 0, 0.5).is_err());
        assert_eq!(mvu_two_state_mse(0.3, 1.0), 0.0);
    }

    #[test]
    fn exact_and_recurrence_shares_agree() {
        let n = 5;
        let s = 40;
        let exact = cycle_share(s, n);
        let k = (n - 2) as f64;
        let mut cur = (n - 1) as f64 / (s + n - 1) as f64;
        for (i, t) in exact.iter().enumerate() {
            assert!((t - cur).abs() <= 1e-13 * t.max(1e-300), "i={i}");
            let m = (s + n - 2 - i as u64) as f64;
            cur *= (m - k) / m;
        }
        assert!((cycle_share(200, 7).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dilogarithm_values() {
        assert_eq!(dilogarithm(0.0), 0.0);
        assert!((dilogarithm(1.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-15);
        // Li2(1/2) = pi^2/12 - ln(2)^2/2
        let half = std::f64::consts::PI.powi(2) / 12.0 - std::f64::consts::LN_2.powi(2) / 2.0;
        assert!((dilogarithm(0.5) - half).abs() < 1e-15);
    }
}
