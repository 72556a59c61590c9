//! Dense complex matrix helpers shared by the rest of the crate.

use nalgebra::DMatrix;
use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn zeros(n: usize) -> CMat {
    Array2::zeros((n, n))
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

pub fn comm(a: &CMat, b: &CMat) -> CMat {
    let mut c = a.dot(b);
    c -= &b.dot(a);
    c
}

pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// tr(AB) without forming the product.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    Zip::from(a).and(&b.t()).fold(C64::new(0.0, 0.0), |acc, &x, &y| acc + x * y)
}

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖A + A†‖_F, zero exactly when A is skew-Hermitian.
pub fn skew_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[[i, j]] + a[[j, i]].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Projects onto skew-Hermitian matrices, returning ‖A + A†‖_F of the input.
pub fn make_skew(a: &mut CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i..n {
            let x = a[[i, j]];
            let y = a[[j, i]];
            acc += (x + y.conj()).norm_sqr() * if i == j { 1.0 } else { 2.0 };
            // The mirror entry equals -conj(v) but keeps +0 where v has +0.
            a[[i, j]] = (x - y.conj()) * 0.5;
            a[[j, i]] = (y - x.conj()) * 0.5;
        }
    }
    acc.sqrt()
}

pub fn remove_trace(a: &mut CMat) {
    let n = a.nrows();
    let t = trace(a) / n as f64;
    for i in 0..n {
        a[[i, i]] -= t;
    }
}

pub fn check_square(a: &CMat, n: usize) -> Result<()> {
    check_dim(n, a.nrows())?;
    check_dim(n, a.ncols())
}

fn to_nalgebra(a: &CMat) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_nalgebra(m: &DMatrix<C64>) -> CMat {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = to_nalgebra(h).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a real symmetric matrix given row-major, ascending.
pub fn symmetric_eigenvalues(n: usize, rows: &[f64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(n, n, rows);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Solves AX = B by LU with partial pivoting.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let lu = to_nalgebra(a).lu();
    lu.solve(&to_nalgebra(b))
        .map(|x| from_nalgebra(&x))
        .ok_or_else(|| Error::SingularOperator("LU solve on a singular matrix".into()))
}
