//! The Hoppe–Yau Laplacian Δ = Σ_α [S_α, [S_α, ·]] on u(n).
//!
//! Δ maps every matrix diagonal to itself and acts on each one as a real
//! symmetric tridiagonal matrix, so apply and solve cost O(n²).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mat::{check_square, comm, frob, trace, zeros, CMat, C64};
use crate::quantization::{HarmonicBasis, SpinBasis};

#[derive(Clone, Debug)]
struct Band {
    /// Δ restricted to the diagonal: main and off-diagonal coefficients.
    main: Vec<f64>,
    off: Vec<f64>,
    /// LDLᵀ of -Δ on this diagonal (leading block only when k = 0).
    ldl_d: Vec<f64>,
    ldl_l: Vec<f64>,
}

/// Band coefficients laid out like the matrix: entry (i, j) holds the
/// coefficient of diagonal |i - j| at position min(i, j). The recurrences
/// along a diagonal then link (i, j) with (i ± 1, j ± 1), so every sweep
/// runs over contiguous rows.
#[derive(Clone, Debug)]
struct Planes {
    main: Vec<f64>,
    /// Coupling between (i, j) and (i + 1, j + 1).
    off: Vec<f64>,
    /// LDLᵀ multipliers, zero on the main diagonal.
    ldl_l: Vec<f64>,
    /// -1/d of the LDLᵀ pivots, one on the main diagonal.
    ldl_neg_inv_d: Vec<f64>,
}

impl Planes {
    fn new(bands: &[Band]) -> Self {
        let n = bands.len();
        let mut out = Self {
            main: vec![0.0; n * n],
            off: vec![0.0; n * n],
            ldl_l: vec![0.0; n * n],
            ldl_neg_inv_d: vec![1.0; n * n],
        };
        for i in 0..n {
            for j in 0..n {
                let (k, q) = (i.abs_diff(j), i.min(j));
                let b = &bands[k];
                let at = i * n + j;
                out.main[at] = b.main[q];
                out.off[at] = b.off.get(q).copied().unwrap_or(0.0);
                if k > 0 {
                    out.ldl_l[at] = b.ldl_l.get(q).copied().unwrap_or(0.0);
                    out.ldl_neg_inv_d[at] = -1.0 / b.ldl_d[q];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Laplacian {
    n: usize,
    bands: Vec<Band>,
    planes: Planes,
}

impl Laplacian {
    pub fn new(spin: &SpinBasis) -> Result<Self> {
        let n = spin.n();
        let bands = (0..n).map(|k| extract_band(spin, k)).collect::<Result<Vec<_>>>()?;
        let planes = Planes::new(&bands);
        Ok(Self { n, bands, planes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Tridiagonal coefficients (main, off) of Δ on diagonal ±k.
    pub fn band(&self, k: usize) -> (&[f64], &[f64]) {
        (&self.bands[k].main, &self.bands[k].off)
    }

    pub fn apply(&self, p: &CMat) -> Result<CMat> {
        check_square(p, self.n)?;
        let n = self.n;
        let w = p.as_standard_layout();
        let w = w.as_slice().expect("standard layout");
        let Planes { main, off, .. } = &self.planes;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let row = i * n;
            for j in 0..n {
                out[row + j] = w[row + j] * main[row + j];
            }
            if i + 1 < n {
                let next = row + n;
                for j in 0..n - 1 {
                    let e = off[row + j];
                    out[row + j] += w[next + j + 1] * e;
                }
            }
            if i > 0 {
                let prev = row - n;
                for j in 1..n {
                    out[row + j] += w[prev + j - 1] * off[prev + j - 1];
                }
            }
        }
        Ok(CMat::from_shape_vec((n, n), out).expect("n*n entries"))
    }

    /// The unique traceless P with ΔP = W.
    pub fn solve(&self, w: &CMat) -> Result<CMat> {
        check_square(w, self.n)?;
        let tr = trace(w).norm();
        let tol = 1e-10 * (self.n as f64).sqrt();
        // max |w_ii| <= |W|_F, so the cheap bound settles most calls.
        let diag_max = w.diag().iter().fold(0.0f64, |m, x| m.max(x.norm()));
        if tr > tol * diag_max && tr > tol * frob(w).max(1e-300) {
            return Err(Error::NonzeroTrace { trace: tr });
        }
        Ok(self.solve_unchecked(w))
    }

    /// Solves on the traceless part of W, discarding its center component.
    pub fn solve_projected(&self, w: &CMat) -> CMat {
        let mut w = w.clone();
        crate::mat::remove_trace(&mut w);
        self.solve_unchecked(&w)
    }

    fn solve_unchecked(&self, w: &CMat) -> CMat {
        let n = self.n;
        let w = w.as_standard_layout();
        let ws = w.as_slice().expect("standard layout");
        let Planes { ldl_l, ldl_neg_inv_d, .. } = &self.planes;
        // The main diagonal carries the kernel of Δ; the sweeps below leave it
        // alone and it is solved on its own.
        let mut diag: Vec<C64> = (0..n).map(|i| ws[i * n + i]).collect();
        // Forward substitution, reading W row by row.
        let mut zs: Vec<C64> = Vec::with_capacity(n * n);
        zs.extend_from_slice(&ws[..n]);
        for i in 1..n {
            let prev = (i - 1) * n;
            let l = &ldl_l[prev..i * n];
            let src = &ws[i * n..(i + 1) * n];
            zs.push(src[0]);
            for j in 1..n {
                let v = src[j] - zs[prev + j - 1] * l[j - 1];
                zs.push(v);
            }
        }
        // Pivots and back substitution in one pass.
        let last_row = (n - 1) * n;
        for (x, &s) in zs[last_row..].iter_mut().zip(&ldl_neg_inv_d[last_row..]) {
            *x *= s;
        }
        for i in (0..n - 1).rev() {
            let (head, tail) = zs.split_at_mut((i + 1) * n);
            let row = &mut head[i * n..];
            let l = &ldl_l[i * n..(i + 1) * n];
            let d = &ldl_neg_inv_d[i * n..(i + 1) * n];
            for j in 0..n - 1 {
                row[j] = row[j] * d[j] - tail[j + 1] * l[j];
            }
            row[n - 1] *= d[n - 1];
        }
        let band = &self.bands[0];
        let last = n - 1;
        diag[last] = C64::new(0.0, 0.0);
        ldl_solve(&band.ldl_d, &band.ldl_l, &mut diag[..last]);
        let mean = diag.iter().sum::<C64>() / n as f64;
        for (i, x) in diag.into_iter().enumerate() {
            // ldl_solve inverts -Δ.
            zs[i * n + i] = mean - x;
        }
        CMat::from_shape_vec((n, n), zs).expect("n*n entries")
    }
}

fn sides(k: usize) -> &'static [bool] {
    if k == 0 {
        &[true]
    } else {
        &[true, false]
    }
}

/// A matrix stored diagonal by diagonal: `upper` holds entries (p, p+k) for
/// k >= 0, `lower` holds (p+k, p) for k >= 1, each diagonal contiguous.
struct Diagonals {
    n: usize,
    upper: Vec<C64>,
    lower: Vec<C64>,
}

/// Tile edge for the gather and scatter passes; diagonal reads of a
/// row-major matrix would otherwise touch one cache line per entry.
const TILE: usize = 32;

impl Diagonals {
    fn offset(n: usize, k: usize) -> usize {
        k * n - k * k.saturating_sub(1) / 2
    }

    fn gather(m: &CMat) -> Self {
        let n = m.nrows();
        let total = n * (n + 1) / 2;
        let mut upper = vec![C64::new(0.0, 0.0); total];
        let mut lower = vec![C64::new(0.0, 0.0); total];
        for ib in (0..n).step_by(TILE) {
            for jb in (0..n).step_by(TILE) {
                for i in ib..(ib + TILE).min(n) {
                    for j in jb..(jb + TILE).min(n) {
                        let v = m[[i, j]];
                        if j >= i {
                            upper[Self::offset(n, j - i) + i] = v;
                        } else {
                            lower[Self::offset(n, i - j) + j] = v;
                        }
                    }
                }
            }
        }
        Self { n, upper, lower }
    }

    fn scatter(&self) -> CMat {
        let n = self.n;
        let mut m = zeros(n);
        for ib in (0..n).step_by(TILE) {
            for jb in (0..n).step_by(TILE) {
                for i in ib..(ib + TILE).min(n) {
                    for j in jb..(jb + TILE).min(n) {
                        m[[i, j]] = if j >= i {
                            self.upper[Self::offset(n, j - i) + i]
                        } else {
                            self.lower[Self::offset(n, i - j) + j]
                        };
                    }
                }
            }
        }
        m
    }

    fn get_mut(&mut self, k: usize, upper: bool) -> &mut [C64] {
        let start = Self::offset(self.n, k);
        let len = self.n - k;
        if upper {
            &mut self.upper[start..start + len]
        } else {
            &mut self.lower[start..start + len]
        }
    }
}

fn tri_entry(t: &crate::quantization::Tridiag, a: usize, b: usize) -> C64 {
    if a == b {
        t.diag[a]
    } else if b == a + 1 {
        t.upper[a]
    } else if a == b + 1 {
        t.lower[b]
    } else {
        C64::new(0.0, 0.0)
    }
}

/// Δ applied to the elementary matrix E_ij, as a sparse map.
fn laplacian_of_elementary(spin: &SpinBasis, i: usize, j: usize) -> BTreeMap<(usize, usize), C64> {
    let n = spin.n();
    let near = |x: usize| x.saturating_sub(1)..=(x + 1).min(n - 1);
    let mut total = BTreeMap::new();
    for alpha in 0..3 {
        let t = spin.tridiag(alpha);
        let ad = |src: &BTreeMap<(usize, usize), C64>| {
            let mut dst: BTreeMap<(usize, usize), C64> = BTreeMap::new();
            for (&(r, c), &v) in src {
                for a in near(r) {
                    *dst.entry((a, c)).or_default() += tri_entry(t, a, r) * v;
                }
                for b in near(c) {
                    *dst.entry((r, b)).or_default() -= v * tri_entry(t, c, b);
                }
            }
            dst
        };
        let e = BTreeMap::from([((i, j), C64::new(1.0, 0.0))]);
        for (key, v) in ad(&ad(&e)) {
            *total.entry(key).or_default() += v;
        }
    }
    total
}

/// Tridiagonal coefficients (main, off) of Δ on diagonal k, without
/// building the full operator.
pub(crate) fn band_coefficients(spin: &SpinBasis, k: usize) -> (Vec<f64>, Vec<f64>) {
    let band = extract_band(spin, k).expect("the spin basis gives a symmetric tridiagonal band");
    (band.main, band.off)
}

fn extract_band(spin: &SpinBasis, k: usize) -> Result<Band> {
    let n = spin.n();
    let len = n - k;
    let mut main = vec![0.0; len];
    let mut off = vec![0.0; len.saturating_sub(1)];
    for upper in [true, false] {
        if k == 0 && !upper {
            continue;
        }
        for p in 0..len {
            let (i, j) = if upper { (p, p + k) } else { (p + k, p) };
            for ((r, c), v) in laplacian_of_elementary(spin, i, j) {
                if v.norm() < 1e-13 {
                    continue;
                }
                let on_diag = if upper { c == r + k } else { r == c + k };
                if !on_diag || v.im.abs() > 1e-12 * v.norm().max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "Laplacian band structure violated at diagonal {k}"
                    )));
                }
                let q = if upper { r } else { c };
                let coef = v.re;
                if q == p {
                    set_checked(&mut main[p], coef, upper)?;
                } else if q == p + 1 {
                    set_checked(&mut off[p], coef, upper)?;
                } else if q + 1 == p {
                    // Symmetry: the (p, p-1) coupling must equal (p-1, p).
                    if (off[q] - coef).abs() > 1e-10 * coef.abs().max(1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "Laplacian band on diagonal {k} is not symmetric"
                        )));
                    }
                } else {
                    return Err(Error::InvalidArgument(format!(
                        "Laplacian band on diagonal {k} is not tridiagonal"
                    )));
                }
            }
        }
    }
    let (ldl_d, ldl_l) = if k == 0 {
        ldl_factor(&main[..len - 1], &off[..len.saturating_sub(2)])?
    } else {
        ldl_factor(&main, &off)?
    };
    Ok(Band { main, off, ldl_d, ldl_l })
}

/// Stores the coefficient from the upper pass; the lower pass must agree.
fn set_checked(slot: &mut f64, v: f64, upper: bool) -> Result<()> {
    if upper {
        *slot = v;
    } else if (*slot - v).abs() > 1e-10 * v.abs().max(1.0) {
        return Err(Error::InvalidArgument("Laplacian differs between diagonals ±k".into()));
    }
    Ok(())
}

/// LDLᵀ factorization of the negated tridiagonal (-main, -off), which is
/// positive definite.
fn ldl_factor(main: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = main.len();
    let mut d = vec![0.0; m];
    let mut l = vec![0.0; m.saturating_sub(1)];
    for i in 0..m {
        let mut di = -main[i];
        if i > 0 {
            di -= l[i - 1] * l[i - 1] * d[i - 1];
        }
        if di <= 0.0 {
            return Err(Error::SingularOperator(format!("Laplacian band pivot {di:e} at {i}")));
        }
        d[i] = di;
        if i + 1 < m {
            l[i] = -off[i] / di;
        }
    }
    Ok((d, l))
}

fn ldl_solve(d: &[f64], l: &[f64], z: &mut [C64]) {
    let m = d.len();
    for i in 1..m {
        let prev = z[i - 1];
        z[i] -= prev * l[i - 1];
    }
    for i in 0..m {
        z[i] /= d[i];
    }
    for i in (0..m.saturating_sub(1)).rev() {
        let next = z[i + 1];
        z[i] -= next * l[i];
    }
}

/// Σ_α [S_α, [S_α, P]] with dense products; the reference for the banded path.
pub fn apply_dense_definition(spin: &SpinBasis, p: &CMat) -> Result<CMat> {
    check_square(p, spin.n())?;
    let mut out = zeros(spin.n());
    for alpha in 0..3 {
        let s = spin.s(alpha);
        out += &comm(&s, &comm(&s, p));
    }
    Ok(out)
}

/// Σ f(-l(l+1)) a[l][m] T[l][m] with a the basis coefficients of P.
///
/// Works per diagonal: the basis vectors for fixed k and l = k..n-1 span the
/// diagonal, so the map never leaves O(n) storage per diagonal.
pub fn apply_spectral_fn(p: &CMat, basis: &HarmonicBasis, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let n = basis.n();
    check_square(p, n)?;
    if basis.lmax() + 1 < n {
        return Err(Error::InvalidArgument("spectral functions need the full basis".into()));
    }
    let scale = frob(p).max(1e-300);
    let values: Vec<f64> = (0..n).map(|l| f(-((l * (l + 1)) as f64))).collect();
    let mut diags = Diagonals::gather(p);
    for k in 0..n {
        for &side in sides(k) {
            let z = diags.get_mut(k, side);
            let mut w = vec![C64::new(0.0, 0.0); z.len()];
            for l in k..n {
                let u = basis.vector(l, k);
                let c: C64 = z.iter().zip(u).map(|(z, u)| z * u).sum();
                if c.norm() <= 1e-14 * scale {
                    continue;
                }
                let fl = values[l];
                if !fl.is_finite() {
                    return Err(Error::SingularOperator(format!(
                        "spectral function undefined at eigenvalue {}",
                        -((l * (l + 1)) as f64)
                    )));
                }
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi += c * (fl * ui);
                }
            }
            z.copy_from_slice(&w);
        }
    }
    Ok(diags.scatter())
}

/// 𝒟 = √(-Δ + ¼) - ½, acting as l on the l-th eigenspace.
pub fn apply_d(p: &CMat, basis: &HarmonicBasis) -> Result<CMat> {
    apply_spectral_fn(p, basis, eigen_to_l)
}

/// Recovers l from the Laplacian eigenvalue -l(l+1).
pub fn eigen_to_l(lambda: f64) -> f64 {
    (0.25 - lambda).sqrt() - 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{identity, I};

    #[test]
    fn n8_bands_match_closed_form() {
        let s = SpinBasis::new(8).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        let (main, off) = lap.band(0);
        let c2: Vec<f64> = s.ladder().iter().map(|c| c * c).collect();
        for (p, &d) in main.iter().enumerate() {
            let left = if p > 0 { c2[p - 1] } else { 0.0 };
            let right = if p < 7 { c2[p] } else { 0.0 };
            assert!((d + left + right).abs() < 1e-12);
        }
        for (e, c) in off.iter().zip(&c2) {
            assert!((e - c).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_in_kernel() {
        let s = SpinBasis::new(5).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        let out = lap.apply(&(identity(5) * I)).unwrap();
        assert!(frob(&out) < 1e-12);
    }

    #[test]
    fn solve_rejects_trace() {
        let s = SpinBasis::new(4).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        assert!(matches!(lap.solve(&(identity(4) * I)), Err(Error::NonzeroTrace { .. })));
    }

    #[test]
    fn solve_of_zero() {
        let s = SpinBasis::new(4).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        assert_eq!(lap.solve(&zeros(4)).unwrap(), zeros(4));
    }

    #[test]
    fn n2_acts_as_minus_two() {
        let s = SpinBasis::new(2).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        for a in 0..3 {
            let x = s.s(a);
            assert!(frob(&(lap.apply(&x).unwrap() + &x * C64::new(2.0, 0.0))) < 1e-14);
        }
    }

    #[test]
    fn eigen_to_l_inverts() {
        for l in 0..50 {
            assert!((eigen_to_l(-((l * (l + 1)) as f64)) - l as f64).abs() < 1e-12);
        }
    }
}
