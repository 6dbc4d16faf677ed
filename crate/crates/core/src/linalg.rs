//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Solves `a x = b` for Hermitian positive-definite `a` by Cholesky.
/// Returns `None` when the factorization breaks down.
pub fn hermitian_solve(a: &CMatrix, b: &CVector) -> Option<CVector> {
    let chol = a.clone().cholesky()?;
    // Complex Cholesky takes complex square roots instead of failing, so
    // indefiniteness shows up as a pivot that is not real and positive.
    let l = chol.l_dirty();
    let scale = a.diagonal().iter().map(|d| d.re.abs()).fold(0.0, f64::max);
    if l.diagonal().iter().any(|d| !(d.re > 0.0) || d.im.abs() > 1e-12 * scale.sqrt().max(d.re)) {
        return None;
    }
    Some(chol.solve(b))
}

/// Cholesky factor of Hermitian `a`, or `None` when `a` is not numerically
/// positive definite: a pivot is not real and positive, or the squared pivot
/// ratio falls below `rcond` (roughly the reciprocal condition number).
pub fn conditioned_cholesky(a: &CMatrix, rcond: f64) -> Option<Cholesky<C64, Dyn>> {
    let chol = a.clone().cholesky()?;
    let scale = a.diagonal().iter().map(|d| d.re.abs()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for d in chol.l_dirty().diagonal().iter() {
        if !(d.re > 0.0) || d.im.abs() > 1e-12 * scale.sqrt().max(d.re) {
            return None;
        }
        lo = lo.min(d.re);
        hi = hi.max(d.re);
    }
    (lo * lo > rcond * hi * hi).then_some(chol)
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
/// Singular values below `rcond · σ_max` (and never below machine precision)
/// are treated as zero.
pub fn min_norm_solve(a: &CMatrix, b: &CVector, rcond: f64) -> CVector {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let floor = f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    let eps = rcond.max(floor) * smax.max(f64::MIN_POSITIVE);
    match svd.solve(b, eps) {
        Ok(x) => x,
        // Only fails when U/V were not computed, which never happens here.
        Err(_) => CVector::zeros(a.ncols()),
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Fails with a message when `a` has an eigenvalue below `-tol * max(1, |λ|max)`.
pub(crate) fn check_psd(a: &CMatrix, tol: f64, what: &str) -> Result<(), String> {
    let vals = hermitian_eigenvalues(a);
    let Some(&min) = vals.first() else {
        return Ok(());
    };
    let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if min < -tol * scale {
        return Err(format!("{what} has negative eigenvalue {min:.3e}"));
    }
    Ok(())
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
///
/// Starts from the all-ones vector plus a deterministic perturbation so that
/// the iterate is not orthogonal to the dominant eigenvector in practice.
pub fn power_iteration(a: &CMatrix, max_iterations: usize, tol: f64) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = CVector::from_fn(n, |i, _| C64::new(1.0, 0.1 * (i as f64 + 1.0).sin()));
    x /= C64::from(x.norm());
    let mut estimate = 0.0;
    for _ in 0..max_iterations {
        let y = a * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = x.dotc(&y).re;
        x = y / C64::from(norm);
        if (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next.max(norm);
        }
        estimate = next;
    }
    estimate
}

/// `x^H a x`, real part (exact for Hermitian `a`).
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// `x x^H`
pub fn outer(x: &CVector) -> CMatrix {
    x * x.adjoint()
}

/// Relative Frobenius distance of `a` from its conjugate transpose.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    (a - a.adjoint()).norm() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
    const ONE: C64 = C64 { re: 1.0, im: 0.0 };

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermitian_solve_matches_direct_product() {
        let a = CMatrix::from_row_slice(2, 2, &[c(4.0, 0.0), c(1.0, 2.0), c(1.0, -2.0), c(6.0, 0.0)]);
        let x = CVector::from_vec(vec![c(1.0, -1.0), c(0.5, 2.0)]);
        let b = &a * &x;
        let got = hermitian_solve(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-12);
    }

    #[test]
    fn hermitian_solve_rejects_indefinite() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), ZERO, ZERO, c(-1.0, 0.0)]);
        assert!(hermitian_solve(&a, &CVector::from_element(2, ONE)).is_none());
    }

    #[test]
    fn min_norm_on_singular_system() {
        // a = diag(2, 0): consistent rhs keeps the null component at zero.
        let a = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), ZERO, ZERO, ZERO]);
        let b = CVector::from_vec(vec![c(4.0, 2.0), ZERO]);
        let x = min_norm_solve(&a, &b, 0.0);
        assert!((x[0] - c(2.0, 1.0)).norm() < 1e-12);
        assert!(x[1].norm() < 1e-12);
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c(5.0, 0.0), c(1.0, 1.0), ZERO, c(1.0, -1.0), c(3.0, 0.0), ZERO, ZERO, ZERO, c(1.0, 0.0)],
        );
        let exact = *hermitian_eigenvalues(&a).last().unwrap();
        let est = power_iteration(&a, 500, 1e-14);
        assert!((est - exact).abs() < 1e-8 * exact, "{est} vs {exact}");
    }

    #[test]
    fn psd_check() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(check_psd(&a, 1e-8, "a").is_err());
        assert!(check_psd(&outer(&CVector::from_element(3, c(1.0, 2.0))), 1e-8, "a").is_ok());
    }

    #[test]
    fn empty_matrix_is_psd() {
        let a = CMatrix::zeros(0, 0);
        assert!(hermitian_eigenvalues(&a).is_empty());
        assert!(check_psd(&a, 1e-8, "a").is_ok());
    }

    #[test]
    fn conditioned_cholesky_respects_rcond() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), ZERO, ZERO, c(1e-14, 0.0)]);
        assert!(conditioned_cholesky(&a, 0.0).is_some());
        assert!(conditioned_cholesky(&a, 1e-12).is_none());
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), ZERO, ZERO, c(-1.0, 0.0)]);
        assert!(conditioned_cholesky(&neg, 0.0).is_none());
    }
}
