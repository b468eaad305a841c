//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::DVector;

use crate::{CMatrix, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > tol * smax).count(),
        _ => 0,
    }
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Ratio `sigma_max / sigma_min`; infinite for singular matrices.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Frobenius norm of `m - m^*`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Orthonormal basis (as rows) of the row space of a full-row-rank matrix.
pub fn orthonormal_rows(m: &CMatrix) -> CMatrix {
    let r = m.nrows();
    if r == 0 {
        return CMatrix::zeros(0, m.ncols());
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    // nalgebra does not sort singular values; pick the r largest.
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    CMatrix::from_fn(r, m.ncols(), |i, j| v_t[(idx[i], j)])
}

/// Distance `||P1 - P2||_2` between the orthogonal projectors onto the row
/// spaces of two matrices with orthonormal rows. Equals the sine of the
/// largest principal angle when the dimensions agree.
pub fn projection_distance(q1: &CMatrix, q2: &CMatrix) -> f64 {
    let p1 = q1.adjoint() * q1;
    let p2 = q2.adjoint() * q2;
    spectral_norm(&(p1 - p2))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = (m + m.adjoint()).scale(0.5);
    let ev: DVector<f64> = h.symmetric_eigenvalues();
    let mut v: Vec<f64> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `||S^* S - I||_2`, the unitarity defect of a square matrix.
pub fn unitarity_defect(s: &CMatrix) -> f64 {
    let n = s.nrows();
    spectral_norm(&(s.adjoint() * s - CMatrix::identity(n, n)))
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Solve `m x = rhs` by LU, rejecting matrices whose condition number
/// exceeds `max_cond`. Returns the solution and the condition number.
pub fn solve_checked(m: &CMatrix, rhs: &CMatrix, max_cond: f64) -> Option<(CMatrix, f64)> {
    let cond = condition_number(m);
    if !cond.is_finite() || cond > max_cond {
        return None;
    }
    m.clone().lu().solve(rhs).map(|x| (x, cond))
}
