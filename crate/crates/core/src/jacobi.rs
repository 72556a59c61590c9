//! Jacobi fields: linearized Euler–Arnold flow, the closed forms along the
//! steady geodesic P = B = ħS3, and numerical conjugate-point detection.
//!
//! In every `ExtElement` here the `p` slot is the stream component (Z₂, Y₂)
//! and the `b` slot the swirl component (Z₁, Y₁).

use std::f64::consts::PI;

use crate::algebra::{ad_ext, BracketParams, ExtElement};
use crate::dynamics::euler_arnold_rhs;
use crate::error::{check_dim, Error, Result};
use crate::laplacian::{apply_d, apply_spectral_fn, eigen_to_l};
use crate::mat::{comm, frob, CMat, C64};
use crate::Context;

#[derive(Clone, Debug, PartialEq)]
pub struct JacobiState {
    /// Velocity perturbation.
    pub z: ExtElement,
    /// Flow perturbation.
    pub y: ExtElement,
    pub t: f64,
}

/// Time derivatives (ż, ẏ).
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiDerivative {
    pub z: ExtElement,
    pub y: ExtElement,
}

/// Linearization of the Euler–Arnold equation at `background`, together with
/// ẏ = ad_u y + z.
pub fn jacobi_rhs(js: &JacobiState, background: &ExtElement, params: &BracketParams) -> Result<JacobiDerivative> {
    let ctx = params.ctx;
    check_dim(ctx.n(), background.n())?;
    check_dim(ctx.n(), js.z.n())?;
    check_dim(ctx.n(), js.y.n())?;
    let s = C64::new(params.scale, 0.0);
    let (u, z) = (background, &js.z);
    let mut wu = ctx.lap.apply(&u.p)?;
    wu += &u.b;
    let mut wz = ctx.lap.apply(&z.p)?;
    wz += &z.b;
    let mut inner = comm(&z.p, &wu);
    inner += &comm(&u.p, &wz);
    let z2_dot = -ctx.lap.solve(&(inner * s))?;
    let z1_dot = -((comm(&u.p, &z.b) + comm(&z.p, &u.b)) * s);
    let y_dot = &ad_ext(u, &js.y, params)? + z;
    Ok(JacobiDerivative { z: ExtElement { p: z2_dot, b: z1_dot }, y: y_dot })
}

/// Same equations specialized to the steady geodesic P = B = ħS3 with the
/// physical bracket, where every commutator is 𝒞 = ad_{S3}:
/// Ż₁ = 𝒞(Z₂ - Z₁), ΔŻ₂ = -𝒞(Z₁ + Z₂ + ΔZ₂), Ẏ₂ = Z₂ - 𝒞Y₂, Ẏ₁ = Z₁ - 𝒞Y₁.
/// Costs O(n²) per evaluation.
pub fn steady_jacobi_rhs(js: &JacobiState, ctx: &Context) -> Result<JacobiDerivative> {
    let c = |x: &CMat| ctx.spin.ad(2, x);
    let z = &js.z;
    let z1_dot = c(&(&z.p - &z.b));
    let mut sum = ctx.lap.apply(&z.p)?;
    sum += &z.b;
    sum += &z.p;
    let z2_dot = -ctx.lap.solve(&c(&sum))?;
    let y2_dot = &z.p - &c(&js.y.p);
    let y1_dot = &z.b - &c(&js.y.b);
    Ok(JacobiDerivative {
        z: ExtElement { p: z2_dot, b: z1_dot },
        y: ExtElement { p: y2_dot, b: y1_dot },
    })
}

/// The steady background (ħS3, ħS3).
pub fn steady_geodesic(ctx: &Context) -> ExtElement {
    let s3 = ctx.spin.s(2) * C64::new(ctx.hbar(), 0.0);
    ExtElement { p: s3.clone(), b: s3 }
}

fn rk4<F>(js: &JacobiState, h: f64, f: F) -> Result<JacobiState>
where
    F: Fn(&JacobiState) -> Result<JacobiDerivative>,
{
    let shift = |d: &JacobiDerivative, a: f64| JacobiState {
        z: js.z.axpy(a, &d.z),
        y: js.y.axpy(a, &d.y),
        t: js.t + a,
    };
    let k1 = f(js)?;
    let k2 = f(&shift(&k1, 0.5 * h))?;
    let k3 = f(&shift(&k2, 0.5 * h))?;
    let k4 = f(&shift(&k3, h))?;
    let comb = |a: &ExtElement, b: &ExtElement, c: &ExtElement, d: &ExtElement| {
        &(&(a + d) + &b.scaled(2.0)) + &c.scaled(2.0)
    };
    Ok(JacobiState {
        z: js.z.axpy(h / 6.0, &comb(&k1.z, &k2.z, &k3.z, &k4.z)),
        y: js.y.axpy(h / 6.0, &comb(&k1.y, &k2.y, &k3.y, &k4.y)),
        t: js.t + h,
    })
}

/// One RK4 step of the Jacobi equations along the steady geodesic.
pub fn steady_rk4_step(js: &JacobiState, h: f64, ctx: &Context) -> Result<JacobiState> {
    rk4(js, h, |s| steady_jacobi_rhs(s, ctx))
}

/// One RK4 step of the Jacobi equations coupled to the geodesic itself, for
/// backgrounds that are not steady. Returns the advanced background too.
pub fn coupled_rk4_step(
    u: &ExtElement,
    js: &JacobiState,
    h: f64,
    params: &BracketParams,
) -> Result<(ExtElement, JacobiState)> {
    let eval = |u: &ExtElement, s: &JacobiState| -> Result<(ExtElement, JacobiDerivative)> {
        Ok((euler_arnold_rhs(u, params)?, jacobi_rhs(s, u, params)?))
    };
    let shift = |u0: &ExtElement, s0: &JacobiState, du: &ExtElement, d: &JacobiDerivative, a: f64| {
        (
            u0.axpy(a, du),
            JacobiState { z: s0.z.axpy(a, &d.z), y: s0.y.axpy(a, &d.y), t: s0.t + a },
        )
    };
    let (u1, d1) = eval(u, js)?;
    let (ua, sa) = shift(u, js, &u1, &d1, 0.5 * h);
    let (u2, d2) = eval(&ua, &sa)?;
    let (ub, sb) = shift(u, js, &u2, &d2, 0.5 * h);
    let (u3, d3) = eval(&ub, &sb)?;
    let (uc, sc) = shift(u, js, &u3, &d3, h);
    let (u4, d4) = eval(&uc, &sc)?;
    let comb = |a: &ExtElement, b: &ExtElement, c: &ExtElement, d: &ExtElement| {
        &(&(a + d) + &b.scaled(2.0)) + &c.scaled(2.0)
    };
    let w = h / 6.0;
    Ok((
        u.axpy(w, &comb(&u1, &u2, &u3, &u4)),
        JacobiState {
            z: js.z.axpy(w, &comb(&d1.z, &d2.z, &d3.z, &d4.z)),
            y: js.y.axpy(w, &comb(&d1.y, &d2.y, &d3.y, &d4.y)),
            t: js.t + h,
        },
    ))
}

/// The decoupled variables: X₃ = X₁ - 𝒟X₂ and X₄ = X₁ + (𝒟+I)X₂.
#[derive(Clone, Debug, PartialEq)]
pub struct Split34 {
    pub v3: CMat,
    pub v4: CMat,
}

pub fn transform_z34(z: &ExtElement, ctx: &Context) -> Result<Split34> {
    let dz = apply_d(&z.p, &ctx.basis)?;
    Ok(Split34 { v3: &z.b - &dz, v4: &(&z.b + &dz) + &z.p })
}

/// Y₃ = Y₁ - 𝒟Y₂ and Y₄ = Y₁ + (𝒟+I)Y₂. The fourth variable is the one
/// compatible with Ẏ₄ + 𝒞Y₄ = Z₄, i.e. built exactly like Z₄.
pub fn transform_y34(y: &ExtElement, ctx: &Context) -> Result<Split34> {
    transform_z34(y, ctx)
}

/// Inverse of [`transform_z34`]: X₂ = (2𝒟+I)⁻¹(X₄ - X₃), X₁ = X₃ + 𝒟X₂.
pub fn inverse_34(split: &Split34, ctx: &Context) -> Result<ExtElement> {
    let diff = &split.v4 - &split.v3;
    let x2 = apply_spectral_fn(&diff, &ctx.basis, |lam| 1.0 / (2.0 * eigen_to_l(lam) + 1.0))?;
    let x1 = &split.v3 + &apply_d(&x2, &ctx.basis)?;
    Ok(ExtElement { p: x2, b: x1 })
}

fn check_block(l: usize, m: i64) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidArgument("block needs l >= 1".into()));
    }
    if m.unsigned_abs() as usize > l {
        return Err(Error::InvalidArgument(format!("|m| = {} exceeds l = {l}", m.abs())));
    }
    Ok(())
}

/// c_{l,m}(t) for Y₃ with c(0) = 0, given (a_{l,m}(0), a_{l,-m}(0)).
pub fn steady_jacobi_solution(l: usize, m: i64, a0: (f64, f64), t: f64) -> Result<f64> {
    check_block(l, m)?;
    if m == 0 {
        return Ok(a0.0 * t);
    }
    let (lf, mf) = (l as f64, m as f64);
    let amp = 2.0 * (lf + 1.0) / mf * (mf * t / (2.0 * (lf + 1.0))).sin();
    let phase = (2.0 * lf + 3.0) * mf * t / (2.0 * (lf + 1.0));
    Ok(amp * (a0.0 * phase.cos() + a0.1 * phase.sin()))
}

/// d_{l,m}(t) for Y₄ with d(0) = 0, given (b_{l,m}(0), b_{l,-m}(0)).
/// For m = 0 the solution grows linearly, as in the Y₃ branch.
pub fn steady_jacobi_solution_d(l: usize, m: i64, b0: (f64, f64), t: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::Unsupported("the Z4 block is empty for l = 0".into()));
    }
    check_block(l, m)?;
    if m == 0 {
        return Ok(b0.0 * t);
    }
    let (lf, mf) = (l as f64, m as f64);
    let amp = 2.0 * lf / mf * (mf * t / (2.0 * lf)).sin();
    let phase = (2.0 * lf - 1.0) * mf * t / (2.0 * lf);
    Ok(amp * (b0.0 * phase.cos() + b0.1 * phase.sin()))
}

fn check_conjugate_block(l: usize, m: i64) -> Result<usize> {
    if m < 1 || m as usize > l {
        return Err(Error::InvalidArgument(format!("need 1 <= m <= l, got l={l}, m={m}")));
    }
    Ok(m as usize)
}

/// The conjugate times 4πkl/m and 4πk(l+1)/m, k = 1..k_max, each with
/// multiplicity 2, merged where the two families coincide.
pub fn conjugate_times(l: usize, m: i64, k_max: usize) -> Result<Vec<(f64, usize)>> {
    let m = check_conjugate_block(l, m)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    // Times in units of 4π/m, kept as integers so coincidences are exact.
    let mut keys: Vec<usize> = (1..=k_max).flat_map(|k| [k * l, k * (l + 1)]).collect();
    keys.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for key in keys {
        match out.last_mut() {
            Some((last, mult)) if *last == key => *mult += 2,
            _ => out.push((key, 2)),
        }
    }
    Ok(out.into_iter().map(|(key, mult)| (4.0 * PI * key as f64 / m as f64, mult)).collect())
}

/// Which decoupled block carries the initial velocity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Z₄(0) = 0; Y vanishes with the c-coefficients.
    Z3,
    /// Z₃(0) = 0; Y vanishes with the d-coefficients.
    Z4,
}

/// All zeros of the closed-form block solution up to `t_max`: the zeros of
/// sin(mt/(2(l+1))) for [`Branch::Z3`] and of sin(mt/(2l)) for
/// [`Branch::Z4`], i.e. 2πk(l+1)/m and 2πkl/m. The conjugate times of
/// [`conjugate_times`] are the even-k members of these families.
pub fn block_zero_times(l: usize, m: i64, branch: Branch, t_max: f64) -> Result<Vec<f64>> {
    let m = check_conjugate_block(l, m)?;
    let period = match branch {
        Branch::Z3 => 2.0 * PI * (l + 1) as f64 / m as f64,
        Branch::Z4 => 2.0 * PI * l as f64 / m as f64,
    };
    Ok((1..).map(|k| k as f64 * period).take_while(|&t| t <= t_max).collect())
}

/// Initial velocity supported on the (l, ±m) block of one branch, built
/// from the basis element T[l][m_sel] (m_sel = m or -m).
pub fn block_initial(l: usize, m_sel: i64, branch: Branch, ctx: &Context) -> Result<ExtElement> {
    let n = ctx.n();
    let t = ctx.basis.matrix(l, m_sel)?;
    let zero = crate::mat::zeros(n);
    let split = match branch {
        Branch::Z3 => Split34 { v3: t, v4: zero },
        Branch::Z4 => Split34 { v3: zero, v4: t },
    };
    inverse_34(&split, ctx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub t: f64,
    pub branch: Branch,
    /// Number of independent initial velocities in the block whose Jacobi
    /// field vanishes at t.
    pub multiplicity: usize,
}

/// Relative threshold on ‖Y‖ (against its running maximum) for a zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// Integrates the Jacobi equations along the steady geodesic from Y(0) = 0
/// with the given Z(0) and returns the times where ‖Y‖ dips below
/// ZERO_THRESHOLD times its running maximum. Each candidate minimum is
/// refined by cubic interpolation of Y through the four nearest samples.
pub fn detect_zeros(z0: &ExtElement, ctx: &Context, dt: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let n = ctx.n();
    let steps = (t_max / dt).ceil() as usize;
    let mut state = JacobiState { z: z0.clone(), y: ExtElement::zeros(n), t: 0.0 };
    // Rolling window of (t, Y, ‖Y‖).
    let mut window: Vec<(f64, ExtElement, f64)> = vec![(0.0, state.y.clone(), 0.0)];
    let mut running_max: f64 = 0.0;
    let mut found = Vec::new();
    for _ in 0..steps {
        state = steady_rk4_step(&state, dt, ctx)?;
        let norm = state.y.frob();
        window.push((state.t, state.y.clone(), norm));
        if window.len() > 4 {
            window.remove(0);
        }
        // window = [.., k-1, k, k+1] once full: test the middle-late sample.
        if window.len() == 4 {
            let (a, b, c) = (window[1].2, window[2].2, window[3].2);
            if b <= a && b < c && running_max > 0.0 {
                if let Some((t, val)) = refine_minimum(&window) {
                    if val <= ZERO_THRESHOLD * running_max {
                        found.push(t);
                    }
                }
            }
        }
        running_max = running_max.max(norm);
    }
    Ok(found)
}

/// Minimizes ‖Y(t)‖ of the cubic interpolant through four samples over the
/// interval between the 2nd and 4th sample.
fn refine_minimum(window: &[(f64, ExtElement, f64)]) -> Option<(f64, f64)> {
    let ts: Vec<f64> = window.iter().map(|w| w.0).collect();
    let eval = |t: f64| -> f64 {
        let mut acc: Option<ExtElement> = None;
        for i in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if i != j {
                    w *= (t - ts[j]) / (ts[i] - ts[j]);
                }
            }
            acc = Some(match acc {
                None => window[i].1.scaled(w),
                Some(a) => a.axpy(w, &window[i].1),
            });
        }
        acc.map(|a| a.frob()).unwrap_or(f64::INFINITY)
    };
    let (mut lo, mut hi) = (ts[1], ts[3]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2);
        }
    }
    let t = 0.5 * (lo + hi);
    Some((t, eval(t)))
}

/// Runs both branches of the (l, ±m) block, two independent initial
/// velocities each, and reports the times at which the Jacobi field
/// vanishes together with how many of the two runs vanish there.
pub fn detect_conjugate_numerical(l: usize, m: i64, n: usize, dt: f64, t_max: f64) -> Result<Vec<Detection>> {
    let ctx = Context::new(n)?;
    detect_conjugate_with(l, m, &ctx, dt, t_max)
}

pub fn detect_conjugate_with(l: usize, m: i64, ctx: &Context, dt: f64, t_max: f64) -> Result<Vec<Detection>> {
    check_block(l, m)?;
    if 2 * l + 1 > ctx.n() {
        return Err(Error::InvalidArgument(format!("l={l} needs n >= {}", 2 * l + 1)));
    }
    let mut out = Vec::new();
    for branch in [Branch::Z3, Branch::Z4] {
        let selections: Vec<i64> = if m == 0 { vec![0] } else { vec![m, -m] };
        let runs = selections
            .iter()
            .map(|&ms| detect_zeros(&block_initial(l, ms, branch, ctx)?, ctx, dt, t_max))
            .collect::<Result<Vec<_>>>()?;
        // Merge: a time seen in several runs (within two steps) counts once
        // per run.
        let mut merged: Vec<(f64, usize)> = Vec::new();
        for t in runs.iter().flatten() {
            match merged.iter_mut().find(|(s, _)| (s - t).abs() <= 2.0 * dt) {
                Some((_, mult)) => *mult += 1,
                None => merged.push((*t, 1)),
            }
        }
        out.extend(merged.into_iter().map(|(t, multiplicity)| Detection { t, branch, multiplicity }));
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Coefficient of T[l][m] in a matrix, for block diagnostics.
pub fn block_coefficient(x: &CMat, l: usize, m: i64, ctx: &Context) -> f64 {
    ctx.basis.coefficient(l, m, x)
}

/// Frobenius norm helper used by decoupling checks.
pub fn norm(x: &CMat) -> f64 {
    frob(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_times_examples() {
        let close = |got: Vec<(f64, usize)>, want: &[(f64, usize)]| {
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(want) {
                assert!((g.0 - w.0).abs() < 1e-12 && g.1 == w.1, "{got:?}");
            }
        };
        close(conjugate_times(1, 1, 1).unwrap(), &[(4.0 * PI, 2), (8.0 * PI, 2)]);
        close(conjugate_times(2, 1, 1).unwrap(), &[(8.0 * PI, 2), (12.0 * PI, 2)]);
        close(
            conjugate_times(2, 2, 2).unwrap(),
            &[(4.0 * PI, 2), (6.0 * PI, 2), (8.0 * PI, 2), (12.0 * PI, 2)],
        );
        // l=1: 4πk·1 and 4πk·2 coincide at 8π for k_max = 2.
        close(conjugate_times(1, 1, 2).unwrap(), &[(4.0 * PI, 2), (8.0 * PI, 4), (16.0 * PI, 2)]);
    }

    #[test]
    fn conjugate_times_rejects_bad_block() {
        assert!(conjugate_times(1, 2, 1).is_err());
        assert!(conjugate_times(2, 0, 1).is_err());
        assert!(conjugate_times(2, 1, 0).is_err());
    }

    #[test]
    fn closed_forms_vanish_at_zero() {
        assert_eq!(steady_jacobi_solution(2, 1, (0.3, -0.7), 0.0).unwrap(), 0.0);
        assert_eq!(steady_jacobi_solution_d(2, 1, (0.3, -0.7), 0.0).unwrap(), 0.0);
        assert!(steady_jacobi_solution(1, 1, (1.0, 0.5), 8.0 * PI).unwrap().abs() < 1e-12);
        assert!(steady_jacobi_solution_d(1, 1, (1.0, 0.5), 4.0 * PI).unwrap().abs() < 1e-12);
        assert_eq!(steady_jacobi_solution(3, 0, (2.0, 0.0), 1.5).unwrap(), 3.0);
        assert!(matches!(steady_jacobi_solution_d(0, 0, (1.0, 0.0), 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_velocity_gives_no_detection() {
        let ctx = Context::new(5).unwrap();
        assert!(detect_zeros(&ExtElement::zeros(5), &ctx, 0.01, 10.0).unwrap().is_empty());
    }
}
