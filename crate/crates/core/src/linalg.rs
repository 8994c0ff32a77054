use nalgebra::{DMatrix, DVector};

/// Reciprocal-condition proxy below which LU is not trusted.
pub(crate) const RCOND_MIN: f64 = 1e-12;
/// Relative cutoff for singular values in the pseudoinverse.
pub(crate) const PINV_CUTOFF: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

/// Partial-pivot LU solve with a conditioning gate and a residual check.
pub(crate) fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let (lo, hi) = u
        .diagonal()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(hi > 0.0) || lo / hi <= RCOND_MIN {
        return None;
    }
    let x = lu.solve(b)?;
    let residual = (a * &x - b).amax();
    let scale = b.amax() + a.amax() * x.amax();
    (residual <= RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE)).then_some(x)
}

/// Minimum-norm least-squares solution via the SVD.
pub(crate) fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.nrows() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = PINV_CUTOFF * smax;
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

pub(crate) fn solve_or_pinv(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    solve_checked(a, b).unwrap_or_else(|| pinv_solve(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_falls_back_to_minimum_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        assert!(solve_checked(&a, &b).is_none());
        let x = solve_or_pinv(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
