//! Small dense helpers on top of faer.

use crate::error::{Error, Result};
use crate::C64;
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a, b⟩ = Σ a_i conj(b_i)`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn scale(v: &[C64], s: C64) -> Vec<C64> {
    v.iter().map(|z| z * s).collect()
}

pub fn matvec(a: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum())
        .collect()
}

pub fn col(a: &Mat<C64>, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_cols(rows: usize, cols: &[Vec<C64>]) -> Mat<C64> {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { zero() })
}

pub fn max_abs(a: &Mat<C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn singular_values(a: &Mat<C64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Eigensolver(format!("svd: {e:?}")))
}

/// Spectral condition number `σ_max / σ_min`.
pub fn cond(a: &Mat<C64>) -> Result<f64> {
    let s = singular_values(a)?;
    let (hi, lo) = (s[0], *s.last().unwrap());
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Orthonormal basis of the numerical null space (singular values at most
/// `rel_tol · σ_max`), ordered by increasing singular value.
pub fn null_space(a: &Mat<C64>, rel_tol: f64) -> Result<Mat<C64>> {
    let n = a.ncols();
    let svd = a
        .svd()
        .map_err(|e| Error::Eigensolver(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0].re } else { 0.0 };
    let thresh = rel_tol * smax.max(f64::MIN_POSITIVE);
    let v = svd.V();
    let mut cols: Vec<usize> = (0..n)
        .filter(|&j| j >= s.nrows() || s[j].re <= thresh)
        .collect();
    cols.reverse();
    Ok(Mat::from_fn(n, cols.len(), |i, k| v[(i, cols[k])]))
}

pub fn solve(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a.partial_piv_lu().solve(b)
}

pub fn solve_vec(a: &Mat<C64>, b: &[C64]) -> Vec<C64> {
    let rhs = from_cols(b.len(), &[b.to_vec()]);
    col(&solve(a, &rhs), 0)
}

pub fn inverse(a: &Mat<C64>) -> Mat<C64> {
    a.partial_piv_lu().inverse()
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("hermitian evd: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// General eigenpairs; eigenvectors as columns.
pub fn eigen(a: &Mat<C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let evd = a
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("evd: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// `(Hermitian part, relative defect)` of a nearly Hermitian matrix.
pub fn hermitian_part(a: &Mat<C64>) -> (Mat<C64>, f64) {
    let n = a.nrows();
    let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let defect = max_abs_diff(a, &h) / max_abs(a).max(f64::MIN_POSITIVE);
    (h, defect)
}

pub fn mat_pow(a: &Mat<C64>, p: usize) -> Mat<C64> {
    let mut out = identity(a.nrows());
    for _ in 0..p {
        out = &out * a;
    }
    out
}

pub fn spectral_norm(a: &Mat<C64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}
