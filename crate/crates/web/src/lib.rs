//! Browser bindings: a stepping simulation, Jacobi fields along the steady
//! geodesic, and the n = 2 curvature.

use std::f64::consts::PI;
use std::sync::Arc;

use axizeit_core::algebra::{normalized_sectional_curvature, ricci, BracketParams, ExtElement};
use axizeit_core::diagnostics::{energy, vorticity_supnorm};
use axizeit_core::dynamics::{default_dt, step_with, IntegratorConfig, Method, SimState};
use axizeit_core::io::{field_grid, make_initial_random, make_initial_sim1, GridField};
use axizeit_core::jacobi::{steady_jacobi_solution, steady_jacobi_solution_d};
use axizeit_core::mat::{zeros, CMat, C64};
use axizeit_core::Context;
use wasm_bindgen::prelude::*;

fn msg(e: axizeit_core::Error) -> String {
    e.to_string()
}

#[wasm_bindgen]
pub struct Simulation {
    ctx: Arc<Context>,
    state: SimState,
    cfg: IntegratorConfig,
}

#[wasm_bindgen]
impl Simulation {
    /// `preset` is "sim1" or "random"; a non-positive `dt` picks the default.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, preset: &str, seed: u64, dt: f64) -> Result<Simulation, String> {
        let ctx = Context::new(n).map_err(msg)?;
        let x = match preset {
            "sim1" => make_initial_sim1(&ctx),
            "random" => make_initial_random(&ctx, 10.min(n - 1), seed),
            other => return Err(format!("unknown preset {other:?}")),
        }
        .map_err(msg)?;
        let dt = if dt > 0.0 { dt } else { default_dt(n) };
        let cfg = IntegratorConfig::new(dt, Method::StructurePreserving);
        Ok(Simulation { ctx, state: SimState { t: 0.0, x }, cfg })
    }

    pub fn advance(&mut self, steps: u32) -> Result<(), String> {
        for _ in 0..steps {
            let (next, _) = step_with(&self.state, self.cfg.dt, &self.cfg, &self.ctx).map_err(msg)?;
            self.state = next;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn supnorm(&self) -> Result<f64, String> {
        vorticity_supnorm(&self.state.x, &self.ctx).map_err(msg)
    }

    pub fn energy(&self) -> Result<f64, String> {
        energy(&self.state.x, &self.ctx).map_err(msg)
    }

    /// Row-major nlat × nlon samples of "vorticity", "swirl" or "stream".
    pub fn grid(&self, field: &str, nlat: usize, nlon: usize) -> Result<Vec<f64>, String> {
        let field: GridField = field.parse().map_err(msg)?;
        Ok(field_grid(&self.state.x, self.state.t, field, &self.ctx, nlat, nlon).map_err(msg)?.values)
    }
}

/// Closed-form Jacobi field coefficients on T_{l,m} at `samples` evenly
/// spaced times in [0, tmax], for the Z3 ("c") and Z4 ("d") blocks, started
/// from unit velocity in the (l, m) component.
#[wasm_bindgen]
pub fn jacobi_curve(l: usize, m: i32, block: &str, tmax: f64, samples: usize) -> Result<Vec<f64>, String> {
    let f = match block {
        "c" => steady_jacobi_solution,
        "d" => steady_jacobi_solution_d,
        other => return Err(format!("unknown block {other:?}")),
    };
    let last = samples.max(2) - 1;
    (0..=last)
        .map(|i| f(l, m as i64, (1.0, 0.0), tmax * i as f64 / last as f64).map_err(msg))
        .collect()
}

/// Conjugate times 4πkl/|m| and 4πk(l+1)/|m| up to `tmax`, sorted.
#[wasm_bindgen]
pub fn conjugate_times(l: usize, m: i32, tmax: f64) -> Vec<f64> {
    if m == 0 || l == 0 {
        return Vec::new();
    }
    let mf = m.unsigned_abs() as f64;
    let mut out: Vec<f64> = [l, l + 1]
        .iter()
        .flat_map(|&f| (1..).map(move |k| 4.0 * PI * (k * f) as f64 / mf).take_while(|&t| t <= tmax))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

fn su2(ctx: &Context, v: &[f64]) -> Result<CMat, String> {
    if v.len() != 3 {
        return Err(format!("expected 3 components, got {}", v.len()));
    }
    let mut out = zeros(2);
    for (i, &c) in v.iter().enumerate() {
        out = out + ctx.spin.s(i) * C64::new(c, 0.0);
    }
    Ok(out)
}

/// For Z = (X, Y) in su(2) × su(2), given in the spin-matrix basis, with the
/// plain commutator bracket: [Ric(Z,Z), then the sectional curvature of the
/// plane of Z with each of the six basis directions].
#[wasm_bindgen]
pub fn curvature_n2(x: &[f64], y: &[f64]) -> Result<Vec<f64>, String> {
    let ctx = Context::new(2).map_err(msg)?;
    let params = BracketParams::with_scale(&ctx, 1.0).map_err(msg)?;
    let z = ExtElement { p: su2(&ctx, x)?, b: su2(&ctx, y)? };
    let mut out = vec![ricci(&z, &params).map_err(msg)?];
    for i in 0..6 {
        let s = ctx.spin.s(i % 3);
        let e = if i < 3 { ExtElement { p: s, b: zeros(2) } } else { ExtElement { p: zeros(2), b: s } };
        // A plane containing Z twice has no curvature to report.
        out.push(normalized_sectional_curvature(&z, &e, &params).unwrap_or(f64::NAN));
    }
    Ok(out)
}
