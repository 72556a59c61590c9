//! Spin matrices, the harmonic matrix basis T[l][m], and the maps between
//! spherical-harmonic coefficients and u(n).

use std::f64::consts::{FRAC_1_SQRT_2, PI};


use crate::error::{Error, Result};
use crate::mat::{check_square, zeros, CMat, C64, I};

/// A tridiagonal complex matrix; all three spin matrices have this shape.
#[derive(Clone, Debug)]
pub struct Tridiag {
    pub diag: Vec<C64>,
    pub upper: Vec<C64>,
    pub lower: Vec<C64>,
}

impl Tridiag {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.n();
        let mut m = zeros(n);
        for p in 0..n {
            m[[p, p]] = self.diag[p];
        }
        for p in 0..n.saturating_sub(1) {
            m[[p, p + 1]] = self.upper[p];
            m[[p + 1, p]] = self.lower[p];
        }
        m
    }

    /// [S, B] in O(n²).
    pub fn commutator(&self, b: &CMat) -> CMat {
        let n = self.n();
        let mut out = zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut v = (self.diag[i] - self.diag[j]) * b[[i, j]];
                if i + 1 < n {
                    v += self.upper[i] * b[[i + 1, j]];
                }
                if i > 0 {
                    v += self.lower[i - 1] * b[[i - 1, j]];
                }
                if j > 0 {
                    v -= b[[i, j - 1]] * self.upper[j - 1];
                }
                if j + 1 < n {
                    v -= b[[i, j + 1]] * self.lower[j];
                }
                out[[i, j]] = v;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SpinBasis {
    n: usize,
    hbar: f64,
    /// c_p = sqrt(s(s+1) - j(j+1)) with j = p - s, for p = 0..n-1.
    ladder: Vec<f64>,
    s: [Tridiag; 3],
}

impl SpinBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("spin basis needs n >= 2, got {n}")));
        }
        let spin = (n as f64 - 1.0) / 2.0;
        let casimir = spin * (spin + 1.0);
        let ladder: Vec<f64> = (0..n - 1)
            .map(|p| {
                let j = p as f64 - spin;
                (casimir - j * (j + 1.0)).sqrt()
            })
            .collect();
        let zero = vec![C64::new(0.0, 0.0); n];
        let half: Vec<f64> = ladder.iter().map(|c| c / 2.0).collect();
        let s1 = Tridiag {
            diag: zero.clone(),
            upper: half.iter().map(|&c| C64::new(0.0, c)).collect(),
            lower: half.iter().map(|&c| C64::new(0.0, c)).collect(),
        };
        let s2 = Tridiag {
            diag: zero.clone(),
            upper: half.iter().map(|&c| C64::new(c, 0.0)).collect(),
            lower: half.iter().map(|&c| C64::new(-c, 0.0)).collect(),
        };
        let s3 = Tridiag {
            diag: (0..n).map(|p| C64::new(0.0, p as f64 - spin)).collect(),
            upper: vec![C64::new(0.0, 0.0); n - 1],
            lower: vec![C64::new(0.0, 0.0); n - 1],
        };
        let hbar = 2.0 / ((n * n - 1) as f64).sqrt();
        Ok(Self { n, hbar, ladder, s: [s1, s2, s3] })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spin(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    pub fn tridiag(&self, alpha: usize) -> &Tridiag {
        &self.s[alpha]
    }

    /// Dense S_α for α = 0, 1, 2.
    pub fn s(&self, alpha: usize) -> CMat {
        self.s[alpha].to_dense()
    }

    /// [S_α, B].
    pub fn ad(&self, alpha: usize, b: &CMat) -> CMat {
        self.s[alpha].commutator(b)
    }
}

pub fn build_spin_basis(n: usize) -> Result<SpinBasis> {
    SpinBasis::new(n)
}

/// ([S1,B], [S2,B], [S3,B]).
pub fn quantized_gradient(b: &CMat, basis: &SpinBasis) -> Result<(CMat, CMat, CMat)> {
    check_square(b, basis.n())?;
    Ok((basis.ad(0, b), basis.ad(1, b), basis.ad(2, b)))
}

/// Real coefficients a[l][m], 0 <= l <= lmax, |m| <= l.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicCoeffs {
    lmax: usize,
    data: Vec<f64>,
}

impl HarmonicCoeffs {
    pub fn zeros(lmax: usize) -> Self {
        Self { lmax, data: vec![0.0; (lmax + 1) * (lmax + 1)] }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn index(l: usize, m: i64) -> usize {
        debug_assert!(m.unsigned_abs() as usize <= l);
        ((l * l + l) as i64 + m) as usize
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        assert!(l <= self.lmax && m.unsigned_abs() as usize <= l, "({l},{m}) out of range");
        self.data[Self::index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        assert!(l <= self.lmax && m.unsigned_abs() as usize <= l, "({l},{m}) out of range");
        self.data[Self::index(l, m)] = v;
    }

    /// Flat storage in (l, m ascending) order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        (0..=self.lmax).flat_map(move |l| {
            (-(l as i64)..=l as i64).map(move |m| (l, m, self.data[Self::index(l, m)]))
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { lmax: self.lmax, data: self.data.iter().map(|v| v * factor).collect() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let lmax = self.lmax.max(other.lmax);
        let pad = |c: &Self, l: usize, m: i64| if l <= c.lmax { c.get(l, m) } else { 0.0 };
        let mut worst: f64 = 0.0;
        for l in 0..=lmax {
            for m in -(l as i64)..=l as i64 {
                worst = worst.max((pad(self, l, m) - pad(other, l, m)).abs());
            }
        }
        worst
    }
}

/// The orthonormal basis T[l][m] of u(n), stored by matrix diagonal.
///
/// T[l][m] lives on diagonals ±|m|. With u the real unit vector for (l, |m|),
/// F the matrix carrying u on diagonal k = |m| and σ = (-1)^k:
/// T[l][0] = i·diag(u), T[l][k] = σ·i(F + Fᵀ)/√2, T[l][-k] = σ·(F - Fᵀ)/√2.
/// The overall sign per l makes the last entry of the diagonal vector
/// positive, which matches real spherical harmonics with north pole at the
/// last index (ħS3 ↔ cos θ).
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    n: usize,
    lmax: usize,
    /// vectors[l][k], length n - k.
    vectors: Vec<Vec<Vec<f64>>>,
}

impl HarmonicBasis {
    pub fn new(spin: &SpinBasis) -> Self {
        Self::with_lmax(spin, spin.n() - 1)
    }

    pub fn with_lmax(spin: &SpinBasis, lmax: usize) -> Self {
        let lmax = lmax.min(spin.n() - 1);
        let n = spin.n();
        // by_k[k][l - k]: eigenvectors of the Laplacian band on diagonal k.
        let diagonal = |k: usize| -> Vec<Vec<f64>> {
            let (main, off) = crate::laplacian::band_coefficients(spin, k);
            (k..=lmax).map(|l| tridiagonal_eigenvector(&main, &off, -((l * (l + 1)) as f64))).collect()
        };
        #[cfg(feature = "parallel")]
        let by_k: Vec<Vec<Vec<f64>>> = {
            use rayon::prelude::*;
            (0..=lmax).into_par_iter().map(diagonal).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let by_k: Vec<Vec<Vec<f64>>> = (0..=lmax).map(diagonal).collect();
        let mut vectors: Vec<Vec<Vec<f64>>> = (0..=lmax).map(|l| Vec::with_capacity(l + 1)).collect();
        for (k, col) in by_k.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                vectors[k + i].push(v);
            }
        }
        for v in vectors.iter_mut() {
            fix_signs(v, spin.ladder());
        }
        Self { n, lmax, vectors }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// The real diagonal vector for (l, k = |m|).
    pub fn vector(&self, l: usize, k: usize) -> &[f64] {
        &self.vectors[l][k]
    }

    /// Entry multipliers (upper, lower) so that T[p][p+k] = up·u_p and
    /// T[p+k][p] = lo·u_p.
    fn phases(m: i64) -> (C64, C64) {
        let k = m.unsigned_abs();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        if m == 0 {
            (I, I)
        } else if m > 0 {
            let v = I * (sign * FRAC_1_SQRT_2);
            (v, v)
        } else {
            let v = C64::new(sign * FRAC_1_SQRT_2, 0.0);
            (v, -v)
        }
    }

    fn check_lm(&self, l: usize, m: i64) -> Result<()> {
        if l > self.lmax || m.unsigned_abs() as usize > l {
            return Err(Error::InvalidArgument(format!(
                "basis element ({l},{m}) outside lmax={}",
                self.lmax
            )));
        }
        Ok(())
    }

    pub fn matrix(&self, l: usize, m: i64) -> Result<CMat> {
        self.check_lm(l, m)?;
        let mut out = zeros(self.n);
        self.add_scaled(&mut out, l, m, 1.0);
        Ok(out)
    }

    fn add_scaled(&self, out: &mut CMat, l: usize, m: i64, a: f64) {
        let k = m.unsigned_abs() as usize;
        let u = &self.vectors[l][k];
        let (up, lo) = Self::phases(m);
        if k == 0 {
            for (p, &v) in u.iter().enumerate() {
                out[[p, p]] += up * (a * v);
            }
        } else {
            for (p, &v) in u.iter().enumerate() {
                out[[p, p + k]] += up * (a * v);
                out[[p + k, p]] += lo * (a * v);
            }
        }
    }

    /// tr(T[l][m]† M).
    pub fn coefficient(&self, l: usize, m: i64, mat: &CMat) -> f64 {
        let k = m.unsigned_abs() as usize;
        let u = &self.vectors[l][k];
        let (up, lo) = Self::phases(m);
        let mut acc = C64::new(0.0, 0.0);
        if k == 0 {
            for (p, &v) in u.iter().enumerate() {
                acc += up.conj() * mat[[p, p]] * v;
            }
        } else {
            for (p, &v) in u.iter().enumerate() {
                acc += (up.conj() * mat[[p, p + k]] + lo.conj() * mat[[p + k, p]]) * v;
            }
        }
        acc.re
    }
}

/// Signs for one l: the top diagonal is positive, each lowering step
/// L(u_k) = c_{r+k-1} u_k[r] - c_{r-1} u_k[r-1] points along u_{k-1}, and
/// the last entry on the main diagonal is positive.
fn fix_signs(u: &mut [Vec<f64>], c: &[f64]) {
    let l = u.len() - 1;
    if u[l].iter().sum::<f64>() < 0.0 {
        u[l].iter_mut().for_each(|x| *x = -*x);
    }
    for k in (1..=l).rev() {
        let len = u[k].len();
        let lowered = (0..=len).map(|r| {
            let mut w = 0.0;
            if r < len {
                w += c[r + k - 1] * u[k][r];
            }
            if r >= 1 {
                w -= c[r - 1] * u[k][r - 1];
            }
            w
        });
        let dot: f64 = lowered.zip(&u[k - 1]).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            u[k - 1].iter_mut().for_each(|x| *x = -*x);
        }
    }
    if *u[0].last().expect("nonempty") < 0.0 {
        for v in u.iter_mut() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Unit eigenvector of the symmetric tridiagonal (main, off) for the
/// eigenvalue `lambda`, by inverse iteration with the exact shift.
fn tridiagonal_eigenvector(main: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let m = main.len();
    if m == 1 {
        return vec![1.0];
    }
    let scale = main.iter().chain(off).fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let tiny = f64::EPSILON * scale;
    // LU of T - λI with partial pivoting; U has two superdiagonals.
    let mut d: Vec<f64> = main.iter().map(|x| x - lambda).collect();
    let mut du = off.to_vec();
    let mut dl = off.to_vec();
    let mut du2 = vec![0.0; m.saturating_sub(2)];
    let mut swapped = vec![false; m - 1];
    for i in 0..m - 1 {
        if d[i] == 0.0 && dl[i] == 0.0 {
            d[i] = tiny;
        }
        if d[i].abs() >= dl[i].abs() {
            let f = dl[i] / d[i];
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < m {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            swapped[i] = true;
        }
    }
    for x in d.iter_mut() {
        if x.abs() < tiny {
            *x = if *x < 0.0 { -tiny } else { tiny };
        }
    }
    // A start vector with no special structure.
    let mut b: Vec<f64> = (0..m).map(|q| 1.0 + 0.5 * ((q as f64) * 0.754_877_666).sin()).collect();
    for _ in 0..3 {
        for i in 0..m - 1 {
            if swapped[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - dl[i] * b[i];
            } else {
                b[i + 1] -= dl[i] * b[i];
            }
        }
        b[m - 1] /= d[m - 1];
        b[m - 2] = (b[m - 2] - du[m - 2] * b[m - 1]) / d[m - 2];
        for i in (0..m.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
        normalize(&mut b);
    }
    b
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

pub fn build_harmonic_basis(spin: &SpinBasis) -> HarmonicBasis {
    HarmonicBasis::new(spin)
}

/// Σ a[l][m] T[l][m].
pub fn quantize(coeffs: &HarmonicCoeffs, basis: &HarmonicBasis) -> Result<CMat> {
    if coeffs.lmax() > basis.n() - 1 {
        return Err(Error::Truncation { lmax: coeffs.lmax(), n: basis.n() });
    }
    if coeffs.lmax() > basis.lmax() {
        return Err(Error::InvalidArgument(format!(
            "basis built only up to l={}, coefficients need l={}",
            basis.lmax(),
            coeffs.lmax()
        )));
    }
    let mut out = zeros(basis.n());
    for (l, m, a) in coeffs.iter() {
        if a != 0.0 {
            basis.add_scaled(&mut out, l, m, a);
        }
    }
    Ok(out)
}

/// a[l][m] = tr(T[l][m]† M), for every l the basis holds.
pub fn dequantize(mat: &CMat, basis: &HarmonicBasis) -> Result<HarmonicCoeffs> {
    check_square(mat, basis.n())?;
    let defect = crate::mat::skew_defect(mat);
    if defect > 1e-10 * crate::mat::frob(mat).max(1.0) {
        return Err(Error::InvalidArgument(format!("matrix is not skew-Hermitian (defect {defect:e})")));
    }
    let mut out = HarmonicCoeffs::zeros(basis.lmax());
    for l in 0..=basis.lmax() {
        for m in -(l as i64)..=l as i64 {
            out.set(l, m, basis.coefficient(l, m, mat));
        }
    }
    Ok(out)
}

/// Factor relating the quantization of a function to the unit-Frobenius
/// basis: the function x3 = cos θ maps to ħS3 exactly, and more generally
/// the spectrum of the matrix approximates the function's values.
pub fn physical_scale(n: usize) -> f64 {
    (n as f64 / (4.0 * PI)).sqrt()
}

/// Quantization of a function given by its real-harmonic coefficients.
pub fn quantize_function(coeffs: &HarmonicCoeffs, basis: &HarmonicBasis) -> Result<CMat> {
    let mut m = quantize(coeffs, basis)?;
    m *= C64::new(physical_scale(basis.n()), 0.0);
    Ok(m)
}

/// Inverse of [`quantize_function`].
pub fn dequantize_function(mat: &CMat, basis: &HarmonicBasis) -> Result<HarmonicCoeffs> {
    Ok(dequantize(mat, basis)?.scaled(1.0 / physical_scale(basis.n())))
}

/// Latitudes (i + ½)π/nlat and longitudes 2πj/nlon.
pub fn grid_angles(nlat: usize, nlon: usize) -> (Vec<f64>, Vec<f64>) {
    let theta = (0..nlat).map(|i| (i as f64 + 0.5) * PI / nlat as f64).collect();
    let phi = (0..nlon).map(|j| 2.0 * PI * j as f64 / nlon as f64).collect();
    (theta, phi)
}

/// Orthonormal associated Legendre values p[l][m] (m ≥ 0) at cos θ = x,
/// without the Condon–Shortley phase and with the 1/√(4π) included, so that
/// Y_{l,0} = p[l][0] and Y_{l,±m} = √2 p[l][m] (cos mφ, sin mφ).
fn legendre_table(lmax: usize, x: f64) -> Vec<Vec<f64>> {
    let sin = (1.0 - x * x).max(0.0).sqrt();
    let mut p = vec![Vec::new(); lmax + 1];
    for (l, row) in p.iter_mut().enumerate() {
        *row = vec![0.0; l + 1];
    }
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin;
        }
        p[m][m] = pmm;
        if m < lmax {
            p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in m + 2..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Σ a[l][m] Y_{l,m}(θ, φ) on the midpoint grid, row-major (latitude major).
pub fn grid_eval(coeffs: &HarmonicCoeffs, nlat: usize, nlon: usize) -> Vec<f64> {
    let lmax = coeffs.lmax();
    let (theta, phi) = grid_angles(nlat, nlon);
    let mut out = vec![0.0; nlat * nlon];
    let trig: Vec<Vec<(f64, f64)>> = phi
        .iter()
        .map(|&f| (0..=lmax).map(|m| ((m as f64 * f).cos(), (m as f64 * f).sin())).collect())
        .collect();
    for (i, &th) in theta.iter().enumerate() {
        let p = legendre_table(lmax, th.cos());
        let mut cos_part = vec![0.0; lmax + 1];
        let mut sin_part = vec![0.0; lmax + 1];
        for l in 0..=lmax {
            cos_part[0] += coeffs.get(l, 0) * p[l][0];
            for m in 1..=l {
                let s = std::f64::consts::SQRT_2 * p[l][m];
                cos_part[m] += coeffs.get(l, m as i64) * s;
                sin_part[m] += coeffs.get(l, -(m as i64)) * s;
            }
        }
        for (j, tr) in trig.iter().enumerate() {
            let mut v = cos_part[0];
            for m in 1..=lmax {
                v += cos_part[m] * tr[m].0 + sin_part[m] * tr[m].1;
            }
            out[i * nlon + j] = v;
        }
    }
    out
}

/// Builds a coefficient set with a single nonzero entry.
pub fn single_mode(lmax: usize, l: usize, m: i64, value: f64) -> HarmonicCoeffs {
    let mut c = HarmonicCoeffs::zeros(lmax);
    c.set(l, m, value);
    c
}

#[cfg(test)]
pub(crate) fn dense_from(n: usize, f: impl Fn(usize, usize) -> C64) -> CMat {
    ndarray::Array2::from_shape_fn((n, n), |(i, j)| f(i, j))
}
