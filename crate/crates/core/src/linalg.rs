//! Small dense helpers shared by the engine, the integrator and the tests.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{C64, CMat, CVec};

pub const I: C64 = C64::new(0.0, 1.0);

pub fn norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_deviation(a: &CMat) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// `(a + a†) / 2`
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Max absolute row sum.
pub fn row_sum_norm(a: &CMat) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// `Tr(a²)` for a hermitian `a`.
pub fn purity(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Eigenvalues of the hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// Sum of singular values.
pub fn trace_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.iter().sum()
}

pub fn identity(n: usize) -> CMat {
    DMatrix::identity(n, n)
}

pub fn real_scalar(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Row-major nested complex literal into a matrix.
pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}
