//! The Euler–Arnold flow of the extended Zeitlin model and its integrators.
//!
//! In terms of W = ΔP and the stream velocity A = P/ħ the equations read
//! Ẇ = [W + B, A], Ḃ = [B, A]. The structure-preserving stepper is an
//! isospectral midpoint rule: with a = -(h/2)Ã, where Ã = Δ⁻¹W̃/ħ, the stage
//! values solve
//!
//! ```text
//! W_n + (h/2)[B_n, Ã] = (I - a) W̃ (I + a),
//! ```
//! and the update is conjugation by the Cayley map Q = (I - a)⁻¹(I + a):
//!
//! ```text
//! B_{n+1} = Q B_n Q†,     W_{n+1} = Q (W_n + h[B_n, Ã]) Q†.
//! ```
//! B moves by a unitary similarity, so its spectrum is exact; the mixed
//! Casimirs tr(f(iB) W) are preserved exactly as well because the
//! correction h[B_n, Ã] is orthogonal to every f(iB_n). The map is
//! symmetric, hence second order.

use serde::{Deserialize, Serialize};

use crate::algebra::{BracketParams, ExtElement};
use crate::error::{check_dim, Error, Result};
use crate::mat::{comm, frob, identity, make_skew, remove_trace, solve, CMat, C64};
use crate::Context;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    StructurePreserving,
    Rk4Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub method: Method,
    #[serde(default = "default_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_iters")]
    pub max_fixed_point_iters: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_iters() -> usize {
    100
}

/// 0.05 at n = 512, proportionally larger for coarser n.
pub fn default_dt(n: usize) -> f64 {
    0.05 * 512.0 / n as f64
}

impl IntegratorConfig {
    pub fn new(dt: f64, method: Method) -> Self {
        Self { dt, method, fixed_point_tol: default_tol(), max_fixed_point_iters: default_iters() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_fixed_point_iters == 0 {
            return Err(Error::InvalidArgument("fixed point tolerance and iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: ExtElement,
}

/// Per-step bookkeeping of the implicit stage and the symmetrization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
    pub symmetry_defect: f64,
}

/// Post-step loss of skew-Hermitian structure beyond this (relative) aborts.
pub const SYMMETRY_ABORT: f64 = 1e-8;

/// (Ṗ, Ḃ) = (-Δ⁻¹ s[P, ΔP + B], -s[P, B]).
pub fn euler_arnold_rhs(x: &ExtElement, params: &BracketParams) -> Result<ExtElement> {
    let ctx = params.ctx;
    check_dim(ctx.n(), x.n())?;
    let s = C64::new(params.scale, 0.0);
    let mut w = ctx.lap.apply(&x.p)?;
    w += &x.b;
    let p_dot = -ctx.lap.solve(&(comm(&x.p, &w) * s))?;
    let b_dot = -(comm(&x.p, &x.b) * s);
    Ok(ExtElement { p: p_dot, b: b_dot })
}

pub fn step_structure_preserving(
    state: &SimState,
    cfg: &IntegratorConfig,
    ctx: &Context,
) -> Result<(SimState, StepInfo)> {
    step_structure_preserving_h(state, cfg.dt, cfg, ctx)
}

fn step_structure_preserving_h(
    state: &SimState,
    h: f64,
    cfg: &IntegratorConfig,
    ctx: &Context,
) -> Result<(SimState, StepInfo)> {
    check_dim(ctx.n(), state.x.n())?;
    let n = ctx.n();
    let inv_hbar = C64::new(1.0 / ctx.hbar(), 0.0);
    let half = C64::new(0.5 * h, 0.0);
    let w = ctx.lap.apply(&state.x.p)?;
    let b = &state.x.b;
    let velocity = |x: &CMat| ctx.lap.solve_projected(x) * inv_hbar;

    let mut x = w.clone();
    let mut info = StepInfo::default();
    loop {
        let vel = velocity(&x);
        let a = &vel * (-half);
        let ax = a.dot(&x);
        let mut next = &w + &(comm(b, &vel) * half);
        next += &ax;
        next -= &x.dot(&a);
        next += &ax.dot(&a);
        info.iterations += 1;
        info.residual = frob(&(&next - &x));
        x = next;
        if !info.residual.is_finite() {
            return Err(Error::StepFailure { iters: info.iterations, residual: info.residual });
        }
        if info.residual <= cfg.fixed_point_tol * frob(&x).max(1.0) {
            break;
        }
        if info.iterations >= cfg.max_fixed_point_iters {
            return Err(Error::StepFailure { iters: info.iterations, residual: info.residual });
        }
    }

    let vel = velocity(&x);
    let a = &vel * (-half);
    let eye = identity(n);
    let q = solve(&(&eye - &a), &(&eye + &a))?;
    let qh = q.t().mapv(|z| z.conj());
    // Q X Qᴴ written as X + [Q, X] Qᴴ: equal for unitary Q, and exact when
    // X commutes with Q, so steady states stay bit-for-bit fixed.
    let conj = |x: &CMat| x + &comm(&q, x).dot(&qh);
    let mut b_next = conj(b);
    let mut w_mid = w.clone();
    w_mid += &(comm(b, &vel) * C64::new(h, 0.0));
    let mut w_next = conj(&w_mid);

    let defect = make_skew(&mut w_next) / frob(&w_next).max(1.0)
        + make_skew(&mut b_next) / frob(&b_next).max(1.0);
    remove_trace(&mut w_next);
    info.symmetry_defect = defect;
    if !(defect <= SYMMETRY_ABORT) {
        return Err(Error::StructureDrift { defect });
    }
    // Solving for the increment keeps the Δ⁻¹ round-off proportional to the
    // change of W rather than to W itself.
    let mut dw = &w_next - &w;
    remove_trace(&mut dw);
    let p_next = &state.x.p + &ctx.lap.solve(&dw)?;
    Ok((SimState { t: state.t + h, x: ExtElement { p: p_next, b: b_next } }, info))
}

pub fn step_rk4_reference(state: &SimState, cfg: &IntegratorConfig, ctx: &Context) -> Result<SimState> {
    step_rk4_h(state, cfg.dt, ctx)
}

fn step_rk4_h(state: &SimState, h: f64, ctx: &Context) -> Result<SimState> {
    let params = BracketParams::physical(ctx);
    let x = &state.x;
    let k1 = euler_arnold_rhs(x, &params)?;
    let k2 = euler_arnold_rhs(&x.axpy(0.5 * h, &k1), &params)?;
    let k3 = euler_arnold_rhs(&x.axpy(0.5 * h, &k2), &params)?;
    let k4 = euler_arnold_rhs(&x.axpy(h, &k3), &params)?;
    let incr = &(&(&k1 + &k4) + &k2.scaled(2.0)) + &k3.scaled(2.0);
    Ok(SimState { t: state.t + h, x: x.axpy(h / 6.0, &incr) })
}

/// One step of the configured method over an arbitrary interval h.
pub fn step_with(state: &SimState, h: f64, cfg: &IntegratorConfig, ctx: &Context) -> Result<(SimState, StepInfo)> {
    match cfg.method {
        Method::StructurePreserving => step_structure_preserving_h(state, h, cfg, ctx),
        Method::Rk4Reference => Ok((step_rk4_h(state, h, ctx)?, StepInfo::default())),
    }
}

#[derive(Debug, thiserror::Error)]
#[error("simulation aborted at t={}: {source}", last_good.t)]
pub struct RunAborted {
    pub source: Error,
    pub last_good: Box<SimState>,
}

/// Halvings tried on a failed step before giving up.
const MAX_HALVINGS: u32 = 4;

/// Steps from `initial` to `t_end`, calling `observe(state, step_index)`
/// before the first step and after every step. A failed step is retried
/// as 2, 4, ... substeps before the run is aborted.
pub fn run_simulation(
    initial: SimState,
    cfg: &IntegratorConfig,
    t_end: f64,
    ctx: &Context,
    mut observe: impl FnMut(&SimState, u64, &StepInfo) -> Result<()>,
) -> std::result::Result<SimState, RunAborted> {
    let abort = |source: Error, s: &SimState| RunAborted { source, last_good: Box::new(s.clone()) };
    if let Err(e) = cfg.validate() {
        return Err(abort(e, &initial));
    }
    let mut state = initial;
    let t0 = state.t;
    let span = t_end - t0;
    let steps = if span <= 0.0 { 0 } else { (span / cfg.dt - 1e-9).ceil() as u64 };
    if let Err(e) = observe(&state, 0, &StepInfo::default()) {
        return Err(abort(e, &state));
    }
    for k in 1..=steps {
        let target = if k == steps { t_end } else { t0 + k as f64 * cfg.dt };
        let h = target - state.t;
        let mut result = step_with(&state, h, cfg, ctx);
        let mut halvings = 0;
        while let Err(Error::StepFailure { .. }) = result {
            if halvings == MAX_HALVINGS {
                break;
            }
            halvings += 1;
            let pieces = 1u32 << halvings;
            result = substeps(&state, h, pieces, cfg, ctx);
        }
        match result {
            Ok((mut next, info)) => {
                next.t = target;
                state = next;
                if let Err(e) = observe(&state, k, &info) {
                    return Err(abort(e, &state));
                }
            }
            Err(e) => return Err(abort(e, &state)),
        }
    }
    Ok(state)
}

fn substeps(
    state: &SimState,
    h: f64,
    pieces: u32,
    cfg: &IntegratorConfig,
    ctx: &Context,
) -> Result<(SimState, StepInfo)> {
    let mut s = state.clone();
    let mut worst = StepInfo::default();
    for _ in 0..pieces {
        let (next, info) = step_with(&s, h / pieces as f64, cfg, ctx)?;
        worst.iterations = worst.iterations.max(info.iterations);
        worst.residual = worst.residual.max(info.residual);
        worst.symmetry_defect = worst.symmetry_defect.max(info.symmetry_defect);
        s = next;
    }
    Ok((s, worst))
}

/// Exact flow for n = 2.
///
/// With ħL = P + B/2 conserved, both components rotate by the same
/// one-parameter group: X(t) = e^{-tL} X(0) e^{tL} for X = P and X = B.
pub fn exact_solution_n2(x0: &ExtElement, t: f64, ctx: &Context) -> Result<ExtElement> {
    if ctx.n() != 2 || x0.n() != 2 {
        return Err(Error::Unsupported("the closed-form solution exists only for n = 2".into()));
    }
    let mut gen = &x0.p + &(&x0.b * C64::new(0.5, 0.0));
    remove_trace(&mut gen);
    gen *= C64::new(-t / ctx.hbar(), 0.0);
    let u = expm_su2(&gen);
    let uh = u.t().mapv(|z| z.conj());
    Ok(ExtElement { p: u.dot(&x0.p).dot(&uh), b: u.dot(&x0.b).dot(&uh) })
}

/// exp(A) for traceless skew-Hermitian 2×2 A, using A² = -θ²I.
fn expm_su2(a: &CMat) -> CMat {
    let theta = (-(a.dot(a))[[0, 0]].re).max(0.0).sqrt();
    let sinc = if theta < 1e-8 { 1.0 - theta * theta / 6.0 } else { theta.sin() / theta };
    identity(2) * C64::new(theta.cos(), 0.0) + a * C64::new(sinc, 0.0)
}
