mod common;

use axizeit_core::algebra::{metric_ext, BracketParams, ExtElement};
use axizeit_core::diagnostics::{b_spectrum, casimir_c, casimir_i, energy};
use axizeit_core::dynamics::{
    euler_arnold_rhs, exact_solution_n2, run_simulation, step_structure_preserving, step_with,
    IntegratorConfig, Method, SimState,
};
use axizeit_core::mat::C64;
use axizeit_core::rng::SplitMix64;
use axizeit_core::Context;
use proptest::prelude::*;

fn steady(ctx: &Context) -> ExtElement {
    let s3 = ctx.spin.s(2) * C64::new(ctx.hbar(), 0.0);
    ExtElement { p: s3.clone(), b: s3 }
}

#[test]
fn steady_state_is_fixed() {
    let ctx = Context::new(12).unwrap();
    let x0 = steady(&ctx);
    for method in [Method::StructurePreserving, Method::Rk4Reference] {
        let cfg = IntegratorConfig::new(0.1, method);
        let end = run_simulation(SimState { t: 0.0, x: x0.clone() }, &cfg, 100.0, &ctx, |_, _, _| Ok(())).unwrap();
        assert!(common::ext_dist(&end.x, &x0) < 1e-12, "{method:?}");
        assert!((end.t - 100.0).abs() < 1e-12);
    }
}

fn n2_initial(seed: u64) -> ExtElement {
    let mut rng = SplitMix64::new(seed);
    let x = common::random_ext(2, &mut rng);
    x.scaled(0.6 / x.frob())
}

#[test]
fn exact_solution_agrees_with_adaptive_integration() {
    let ctx = Context::new(2).unwrap();
    let params = BracketParams::physical(&ctx);
    for seed in [1, 2, 3] {
        let x0 = n2_initial(seed);
        for t in [0.7, 3.0] {
            let oracle = common::dopri45(
                |v| common::flatten(&euler_arnold_rhs(&common::unflatten(2, v), &params).unwrap()),
                &common::flatten(&x0),
                t,
                1e-13,
                1e-15,
            );
            let exact = exact_solution_n2(&x0, t, &ctx).unwrap();
            assert!(common::ext_dist(&exact, &common::unflatten(2, &oracle)) < 1e-10, "seed={seed} t={t}");
        }
    }
}

#[test]
fn n2_both_components_rotate_with_the_same_generator() {
    // P + B/2 stays constant, which fails for the doubled rotation rate of P.
    let ctx = Context::new(2).unwrap();
    let x0 = n2_initial(7);
    let xt = exact_solution_n2(&x0, 2.5, &ctx).unwrap();
    let l0 = &x0.p + &(&x0.b * C64::new(0.5, 0.0));
    let lt = &xt.p + &(&xt.b * C64::new(0.5, 0.0));
    assert!(common::dist(&l0, &lt) < 1e-13);
}

fn order(method: Method, dts: &[f64]) -> f64 {
    let ctx = Context::new(2).unwrap();
    let x0 = n2_initial(11);
    let t_end = 2.0;
    let exact = exact_solution_n2(&x0, t_end, &ctx).unwrap();
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let mut cfg = IntegratorConfig::new(dt, method);
            cfg.fixed_point_tol = 1e-15;
            let end = run_simulation(SimState { t: 0.0, x: x0.clone() }, &cfg, t_end, &ctx, |_, _, _| Ok(())).unwrap();
            common::ext_dist(&end.x, &exact)
        })
        .collect();
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    common::fit_slope(&lx, &ly)
}

#[test]
fn structure_preserving_is_second_order() {
    let p = order(Method::StructurePreserving, &[0.1, 0.05, 0.025, 0.0125]);
    assert!((1.9..=2.1).contains(&p), "order {p}");
}

#[test]
fn rk4_is_fourth_order() {
    let p = order(Method::Rk4Reference, &[0.2, 0.1, 0.05, 0.025]);
    assert!((3.8..=4.2).contains(&p), "order {p}");
}

#[test]
fn structure_preserving_step_is_symmetric() {
    let ctx = Context::new(6).unwrap();
    let mut rng = SplitMix64::new(31);
    let x0 = common::random_ext(6, &mut rng).scaled(0.3);
    let mut cfg = IntegratorConfig::new(0.05, Method::StructurePreserving);
    cfg.fixed_point_tol = 1e-15;
    let s0 = SimState { t: 0.0, x: x0.clone() };
    let (s1, _) = step_with(&s0, 0.05, &cfg, &ctx).unwrap();
    let (back, _) = step_with(&s1, -0.05, &cfg, &ctx).unwrap();
    assert!(common::ext_dist(&back.x, &x0) < 1e-12);
}

#[test]
fn casimirs_conserved_by_structure_preserving_run() {
    let n = 10;
    let ctx = Context::new(n).unwrap();
    let x0 = unit_random(n, 32);
    let cfg = IntegratorConfig::new(0.05, Method::StructurePreserving);
    let spec0 = b_spectrum(&x0);
    let c0: Vec<f64> = (2..=4).map(|k| casimir_c(&x0, k).unwrap()).collect();
    let i0: Vec<f64> = (1..=3).map(|k| casimir_i(&x0, k, &ctx).unwrap()).collect();
    let end = run_simulation(SimState { t: 0.0, x: x0.clone() }, &cfg, 10.0, &ctx, |_, _, _| Ok(())).unwrap();
    for (a, b) in spec0.iter().zip(b_spectrum(&end.x)) {
        assert!((a - b).abs() < 1e-11);
    }
    for (k, c) in (2..=4).zip(&c0) {
        assert!((casimir_c(&end.x, k).unwrap() - c).abs() < 1e-11 * c.abs().max(1.0));
    }
    for (k, c) in (1..=3).zip(&i0) {
        assert!((casimir_i(&end.x, k, &ctx).unwrap() - c).abs() < 1e-10 * c.abs().max(1.0), "I{k}");
    }
}

fn unit_random(n: usize, seed: u64) -> ExtElement {
    let mut rng = SplitMix64::new(seed);
    let x = common::random_ext(n, &mut rng);
    x.scaled(1.0 / x.frob())
}

#[test]
fn structure_preserving_is_second_order_for_larger_n() {
    // Reference: rk4 with a much smaller step.
    let n = 7;
    let ctx = Context::new(n).unwrap();
    let x0 = unit_random(n, 33);
    let run = |dt: f64, method: Method| {
        let mut cfg = IntegratorConfig::new(dt, method);
        cfg.fixed_point_tol = 1e-15;
        run_simulation(SimState { t: 0.0, x: x0.clone() }, &cfg, 1.0, &ctx, |_, _, _| Ok(())).unwrap().x
    };
    let reference = run(0.001, Method::Rk4Reference);
    let e1 = common::ext_dist(&run(0.02, Method::StructurePreserving), &reference);
    let e2 = common::ext_dist(&run(0.01, Method::StructurePreserving), &reference);
    let ratio = e1 / e2;
    assert!((3.6..=4.4).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn observer_sees_every_step_and_errors_abort() {
    let ctx = Context::new(5).unwrap();
    let cfg = IntegratorConfig::new(0.1, Method::StructurePreserving);
    let x0 = steady(&ctx);
    let mut seen = Vec::new();
    let end = run_simulation(SimState { t: 0.0, x: x0.clone() }, &cfg, 0.95, &ctx, |s, k, _| {
        seen.push((k, s.t));
        Ok(())
    })
    .unwrap();
    assert_eq!(seen.len(), 11);
    assert_eq!(seen[0], (0, 0.0));
    assert_eq!(end.t, 0.95);

    let err = run_simulation(SimState { t: 0.0, x: x0 }, &cfg, 1.0, &ctx, |_, k, _| {
        if k == 3 {
            Err(axizeit_core::Error::InvalidArgument("stop".into()))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    assert!((err.last_good.t - 0.3).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn rhs_is_energy_orthogonal(n in 2usize..9, seed in any::<u64>()) {
        let ctx = Context::new(n).unwrap();
        let params = BracketParams::physical(&ctx);
        let mut rng = SplitMix64::new(seed);
        let x = common::random_ext(n, &mut rng);
        let dx = euler_arnold_rhs(&x, &params).unwrap();
        let rate = metric_ext(&x, &dx, &ctx).unwrap();
        prop_assert!(rate.abs() < 1e-10 * energy(&x, &ctx).unwrap().abs().max(1.0) * params.scale * x.frob());
    }

    #[test]
    fn step_preserves_b_spectrum_and_skewness(n in 2usize..9, seed in any::<u64>()) {
        let ctx = Context::new(n).unwrap();
        let mut rng = SplitMix64::new(seed);
        let x = common::random_ext(n, &mut rng).scaled(0.3);
        let cfg = IntegratorConfig::new(0.05, Method::StructurePreserving);
        let (next, info) = step_structure_preserving(&SimState { t: 0.0, x: x.clone() }, &cfg, &ctx).unwrap();
        prop_assert!(info.symmetry_defect < 1e-12);
        for (a, b) in b_spectrum(&x).iter().zip(b_spectrum(&next.x)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(axizeit_core::mat::skew_defect(&next.x.p) < 1e-14 * next.x.p.iter().fold(1.0f64, |m, z| m.max(z.norm())));
    }
}
