//! Energy, Casimirs, vorticity sup-norm and spectral extremes of B.

use crate::algebra::{metric_ext, ExtElement};
use crate::error::{check_dim, Error, Result};
use crate::mat::{frob, hermitian_eigenvalues, trace, trace_prod, CMat, C64, I};
use crate::Context;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub supnorm: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub i1: f64,
    pub i2: f64,
    pub b_eig_min: f64,
    pub b_eig_max: f64,
}

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 10] {
        [
            self.t,
            self.energy,
            self.supnorm,
            self.c2,
            self.c3,
            self.c4,
            self.i1,
            self.i2,
            self.b_eig_min,
            self.b_eig_max,
        ]
    }
}

/// Relative imaginary residue tolerated before a trace is declared real.
const IMAG_TOL: f64 = 1e-12;

fn real_part(z: C64, scale: f64, quantity: &'static str) -> Result<f64> {
    let residue = z.im.abs() / scale.max(1.0);
    if residue > IMAG_TOL {
        return Err(Error::ImaginaryResidue { quantity, residue });
    }
    Ok(z.re)
}

/// tr(PΔP) - tr(B²).
pub fn energy(x: &ExtElement, ctx: &Context) -> Result<f64> {
    metric_ext(x, x, ctx)
}

/// Powers (iB)^1 .. (iB)^k.
fn powers_ib(b: &CMat, k: usize) -> Vec<CMat> {
    let ib = b * I;
    let mut out = vec![ib.clone()];
    for _ in 1..k {
        let next = out.last().expect("nonempty").dot(&ib);
        out.push(next);
    }
    out
}

/// tr((iB)^k).
pub fn casimir_c(x: &ExtElement, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("Casimir power must be at least 1".into()));
    }
    let pw = powers_ib(&x.b, k);
    let scale = frob(&x.b).powi(k as i32);
    real_part(trace(&pw[k - 1]), scale, "C_k")
}

/// i·tr((iB)^k ΔP).
pub fn casimir_i(x: &ExtElement, k: usize, ctx: &Context) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("Casimir power must be at least 1".into()));
    }
    check_dim(ctx.n(), x.n())?;
    let w = ctx.lap.apply(&x.p)?;
    let pw = powers_ib(&x.b, k);
    let scale = frob(&x.b).powi(k as i32) * frob(&w);
    real_part(I * trace_prod(&pw[k - 1], &w), scale, "I_k")
}

/// Above this size λ_max comes from power iteration instead of a full
/// eigensolve.
pub const FULL_EIGEN_MAX_N: usize = 256;

/// √λ_max(M) with M = -(ΔP + B)² - Σ_α [S_α, B]².
pub fn vorticity_supnorm(x: &ExtElement, ctx: &Context) -> Result<f64> {
    let m = supnorm_operator(x, ctx)?;
    let lmax = if ctx.n() <= FULL_EIGEN_MAX_N {
        *hermitian_eigenvalues(&m).last().expect("nonempty")
    } else {
        power_iteration(&m, 1e-10, 10_000)
    };
    Ok(lmax.max(0.0).sqrt())
}

/// The PSD matrix whose largest eigenvalue is the squared sup-norm.
pub fn supnorm_operator(x: &ExtElement, ctx: &Context) -> Result<CMat> {
    check_dim(ctx.n(), x.n())?;
    let mut v = ctx.lap.apply(&x.p)?;
    v += &x.b;
    let mut m = -v.dot(&v);
    for alpha in 0..3 {
        let g = ctx.spin.ad(alpha, &x.b);
        m -= &g.dot(&g);
    }
    Ok(m)
}

/// Largest eigenvalue of a PSD Hermitian matrix, iterated until the Rayleigh
/// quotient settles to a relative tolerance.
pub fn power_iteration(m: &CMat, tol: f64, max_iter: usize) -> f64 {
    let n = m.nrows();
    let mut rng = crate::rng::SplitMix64::new(0x5eed);
    let mut v: ndarray::Array1<C64> = (0..n).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.mapv_inplace(|z| z / norm);
        let w = m.dot(&v);
        let next: f64 = v.iter().zip(w.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        v = w;
        if (next - lambda).abs() <= tol * next.abs().max(1e-300) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Eigenvalues of the Hermitian matrix iB, ascending.
pub fn b_spectrum(x: &ExtElement) -> Vec<f64> {
    hermitian_eigenvalues(&(&x.b * I))
}

pub fn collect(x: &ExtElement, t: f64, ctx: &Context) -> Result<DiagnosticsRecord> {
    check_dim(ctx.n(), x.n())?;
    let w = ctx.lap.apply(&x.p)?;
    let pw = powers_ib(&x.b, 2);
    let nb = frob(&x.b);
    let nw = frob(&w);
    let c2 = real_part(trace(&pw[1]), nb * nb, "C_2")?;
    let c3 = real_part(trace_prod(&pw[1], &pw[0]), nb.powi(3), "C_3")?;
    let c4 = real_part(trace_prod(&pw[1], &pw[1]), nb.powi(4), "C_4")?;
    let i1 = real_part(I * trace_prod(&pw[0], &w), nb * nw, "I_1")?;
    let i2 = real_part(I * trace_prod(&pw[1], &w), nb * nb * nw, "I_2")?;
    let spec = b_spectrum(x);
    Ok(DiagnosticsRecord {
        t,
        energy: energy(x, ctx)?,
        supnorm: vorticity_supnorm(x, ctx)?,
        c2,
        c3,
        c4,
        i1,
        i2,
        b_eig_min: spec[0],
        b_eig_max: *spec.last().expect("nonempty"),
    })
}
