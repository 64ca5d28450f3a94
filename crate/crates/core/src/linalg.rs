use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold below which a symmetric matrix is treated as
/// singular. Catches exactly collinear columns whose Cholesky factorization
/// would otherwise succeed with a round-off sized pivot.
const PIVOT_TOL: f64 = 1e-10;

/// Cholesky factor of a symmetric positive-definite matrix, or `None` when
/// the matrix is not numerically positive definite.
pub(crate) fn spd_cholesky(a: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let k = a.nrows();
    if k == 0 || a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    for i in 0..k {
        let scale = a[(i, i)].abs();
        let pivot = l[(i, i)] * l[(i, i)];
        if scale <= 0.0 || pivot <= PIVOT_TOL * scale {
            return None;
        }
    }
    Some(chol)
}

pub(crate) fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    spd_cholesky(a).map(|c| c.solve(b))
}

pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    spd_cholesky(a).map(|c| symmetrize(c.inverse()))
}

pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub(crate) fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
