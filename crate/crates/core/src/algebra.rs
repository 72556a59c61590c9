//! The extended algebra su(n) × u(n): bracket, ad, ad*, metric and curvature.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{check_dim, Error, Result};
use crate::mat::{check_square, comm, frob, make_skew, remove_trace, skew_defect, trace, trace_prod, zeros, CMat, C64};
use crate::rng::SplitMix64;
use crate::Context;

/// A pair (P, B): P traceless skew-Hermitian (stream), B skew-Hermitian (swirl).
#[derive(Clone, Debug, PartialEq)]
pub struct ExtElement {
    pub p: CMat,
    pub b: CMat,
}

impl ExtElement {
    pub fn new(p: CMat, b: CMat) -> Result<Self> {
        let n = p.nrows();
        check_square(&p, n)?;
        check_square(&b, n)?;
        Ok(Self { p, b })
    }

    pub fn zeros(n: usize) -> Self {
        Self { p: zeros(n), b: zeros(n) }
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn frob(&self) -> f64 {
        (frob(&self.p).powi(2) + frob(&self.b).powi(2)).sqrt()
    }

    /// Checks the su(n) × u(n) invariants to a relative tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let scale = self.frob().max(1.0);
        let defect = skew_defect(&self.p).max(skew_defect(&self.b));
        if defect > tol * scale {
            return Err(Error::InvalidArgument(format!("not skew-Hermitian (defect {defect:e})")));
        }
        let tr = trace(&self.p).norm();
        if tr > tol * scale {
            return Err(Error::InvalidArgument(format!("stream part has trace {tr:e}")));
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        let a = C64::new(a, 0.0);
        Self { p: &self.p * a, b: &self.b * a }
    }

    /// Gaussian entries projected onto su(n) × u(n).
    pub fn random(n: usize, rng: &mut SplitMix64) -> Self {
        let mut draw = || {
            let mut m = CMat::from_shape_fn((n, n), |_| C64::new(rng.normal(), rng.normal()));
            make_skew(&mut m);
            m
        };
        let mut p = draw();
        remove_trace(&mut p);
        Self { p, b: draw() }
    }

    /// self + a·other.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let a = C64::new(a, 0.0);
        Self { p: &self.p + &(&other.p * a), b: &self.b + &(&other.b * a) }
    }
}

impl Add for &ExtElement {
    type Output = ExtElement;
    fn add(self, rhs: &ExtElement) -> ExtElement {
        ExtElement { p: &self.p + &rhs.p, b: &self.b + &rhs.b }
    }
}

impl Sub for &ExtElement {
    type Output = ExtElement;
    fn sub(self, rhs: &ExtElement) -> ExtElement {
        ExtElement { p: &self.p - &rhs.p, b: &self.b - &rhs.b }
    }
}

impl Neg for &ExtElement {
    type Output = ExtElement;
    fn neg(self) -> ExtElement {
        ExtElement { p: -&self.p, b: -&self.b }
    }
}

impl Mul<f64> for &ExtElement {
    type Output = ExtElement;
    fn mul(self, a: f64) -> ExtElement {
        self.scaled(a)
    }
}

/// Bracket scaling. The dynamics use 1/ħ; the closed forms for n = 2 use 1.
#[derive(Clone, Copy, Debug)]
pub struct BracketParams<'a> {
    pub ctx: &'a Context,
    pub scale: f64,
}

impl<'a> BracketParams<'a> {
    pub fn physical(ctx: &'a Context) -> Self {
        Self { ctx, scale: 1.0 / ctx.hbar() }
    }

    pub fn with_scale(ctx: &'a Context, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("bracket scale must be positive, got {scale}")));
        }
        Ok(Self { ctx, scale })
    }

    fn check(&self, xs: &[&ExtElement]) -> Result<()> {
        for x in xs {
            check_dim(self.ctx.n(), x.n())?;
        }
        Ok(())
    }

    fn s(&self) -> C64 {
        C64::new(self.scale, 0.0)
    }
}

/// (s[P1,P2], s[P1,B2] - s[P2,B1] - s[P1,P2]).
pub fn bracket_ext(x: &ExtElement, y: &ExtElement, params: &BracketParams) -> Result<ExtElement> {
    params.check(&[x, y])?;
    let s = params.s();
    let pp = comm(&x.p, &y.p) * s;
    let b = (comm(&x.p, &y.b) - comm(&y.p, &x.b)) * s - &pp;
    Ok(ExtElement { p: pp, b })
}

/// ad_x y = -[x, y].
pub fn ad_ext(x: &ExtElement, y: &ExtElement, params: &BracketParams) -> Result<ExtElement> {
    Ok(-&bracket_ext(x, y, params)?)
}

/// tr(P1 Δ P2) - tr(B1 B2).
pub fn metric_ext(x: &ExtElement, y: &ExtElement, ctx: &Context) -> Result<f64> {
    check_dim(ctx.n(), x.n())?;
    check_dim(ctx.n(), y.n())?;
    let lp = ctx.lap.apply(&y.p)?;
    Ok((trace_prod(&x.p, &lp) - trace_prod(&x.b, &y.b)).re)
}

/// The metric adjoint of ad: ⟨ad*_x y, w⟩ = ⟨y, ad_x w⟩.
pub fn ad_star_ext(x: &ExtElement, y: &ExtElement, params: &BracketParams) -> Result<ExtElement> {
    params.check(&[x, y])?;
    let s = params.s();
    let lap = &params.ctx.lap;
    let p1b2 = comm(&x.p, &y.b);
    let mut rhs = comm(&x.p, &lap.apply(&y.p)?);
    rhs += &comm(&y.b, &x.b);
    rhs += &p1b2;
    rhs *= s;
    Ok(ExtElement { p: lap.solve(&rhs)?, b: p1b2 * s })
}

/// ⟨R(u,v)v, u⟩ from the Arnold formula; not divided by the plane area.
pub fn sectional_curvature(u: &ExtElement, v: &ExtElement, params: &BracketParams) -> Result<f64> {
    let ctx = params.ctx;
    let a_uv = ad_star_ext(u, v, params)?;
    let a_vu = ad_star_ext(v, u, params)?;
    let ad_uv = ad_ext(u, v, params)?;
    let sum = &(&a_uv + &a_vu) + &ad_uv;
    let first = 0.25 * metric_ext(&sum, &sum, ctx)?;
    let second = metric_ext(&(&a_uv + &ad_uv), &ad_uv, ctx)?;
    let third = metric_ext(&ad_star_ext(u, u, params)?, &ad_star_ext(v, v, params)?, ctx)?;
    Ok(first - second - third)
}

/// Sectional curvature of the plane spanned by u and v.
pub fn normalized_sectional_curvature(
    u: &ExtElement,
    v: &ExtElement,
    params: &BracketParams,
) -> Result<f64> {
    let ctx = params.ctx;
    let uu = metric_ext(u, u, ctx)?;
    let vv = metric_ext(v, v, ctx)?;
    let uv = metric_ext(u, v, ctx)?;
    let area = uu * vv - uv * uv;
    if area <= 1e-14 * uu * vv {
        return Err(Error::DegeneratePlane { area });
    }
    Ok(sectional_curvature(u, v, params)? / area)
}

/// Metric-orthonormal basis {(T/√(l(l+1)), 0)} ∪ {(0, T)}.
pub fn orthonormal_basis(ctx: &Context) -> Result<Vec<ExtElement>> {
    let n = ctx.n();
    if ctx.basis.lmax() + 1 < n {
        return Err(Error::InvalidArgument("orthonormal basis needs the full harmonic basis".into()));
    }
    let mut out = Vec::with_capacity(2 * n * n - 1);
    for l in 1..n {
        let w = 1.0 / ((l * (l + 1)) as f64).sqrt();
        for m in -(l as i64)..=l as i64 {
            let t = ctx.basis.matrix(l, m)? * C64::new(w, 0.0);
            out.push(ExtElement { p: t, b: zeros(n) });
        }
    }
    for l in 0..n {
        for m in -(l as i64)..=l as i64 {
            out.push(ExtElement { p: zeros(n), b: ctx.basis.matrix(l, m)? });
        }
    }
    Ok(out)
}

/// Σ_k ⟨R(e_k, z)z, e_k⟩ over the orthonormal basis.
pub fn ricci(z: &ExtElement, params: &BracketParams) -> Result<f64> {
    let basis = orthonormal_basis(params.ctx)?;
    ricci_with_basis(z, &basis, params)
}

fn ricci_with_basis(z: &ExtElement, basis: &[ExtElement], params: &BracketParams) -> Result<f64> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        basis.par_iter().map(|e| sectional_curvature(e, z, params)).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        basis.iter().map(|e| sectional_curvature(e, z, params)).sum()
    }
}

/// The symmetric Ricci form in the orthonormal basis (row-major), by
/// polarization of the quadratic form.
pub fn ricci_form(params: &BracketParams) -> Result<(Vec<ExtElement>, Vec<f64>)> {
    let basis = orthonormal_basis(params.ctx)?;
    let d = basis.len();
    let mut form = vec![0.0; d * d];
    let diag: Vec<f64> =
        basis.iter().map(|e| ricci_with_basis(e, &basis, params)).collect::<Result<_>>()?;
    for i in 0..d {
        form[i * d + i] = diag[i];
        for j in i + 1..d {
            let sum = ricci_with_basis(&(&basis[i] + &basis[j]), &basis, params)?;
            let v = 0.5 * (sum - diag[i] - diag[j]);
            form[i * d + j] = v;
            form[j * d + i] = v;
        }
    }
    Ok((basis, form))
}

/// Counts (positive, negative, zero) eigenvalues of a symmetric form.
pub fn inertia(d: usize, form: &[f64]) -> (usize, usize, usize) {
    let ev = crate::mat::symmetric_eigenvalues(d, form);
    let tol = 1e-10 * ev.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let pos = ev.iter().filter(|&&v| v > tol).count();
    let neg = ev.iter().filter(|&&v| v < -tol).count();
    (pos, neg, d - pos - neg)
}

/// Inertia of the Ricci form on su(2) × u(2) with the unscaled bracket.
pub fn ricci_signature_n2() -> Result<(usize, usize, usize)> {
    let ctx = Context::new(2)?;
    let params = BracketParams::with_scale(&ctx, 1.0)?;
    let (basis, form) = ricci_form(&params)?;
    Ok(inertia(basis.len(), &form))
}
