mod common;

use std::f64::consts::PI;

use axizeit_core::algebra::{BracketParams, ExtElement};
use axizeit_core::dynamics::euler_arnold_rhs;
use axizeit_core::jacobi::{
    block_initial, block_zero_times, conjugate_times, coupled_rk4_step, detect_conjugate_with, inverse_34,
    jacobi_rhs, steady_geodesic, steady_jacobi_rhs, steady_jacobi_solution, steady_jacobi_solution_d,
    steady_rk4_step, transform_y34, transform_z34, Branch, JacobiState,
};
use axizeit_core::mat::{comm, C64};
use axizeit_core::rng::SplitMix64;
use axizeit_core::Context;
use proptest::prelude::*;

#[test]
fn z_equation_is_the_linearized_flow() {
    let mut rng = SplitMix64::new(51);
    for n in [2, 5, 8] {
        let ctx = Context::new(n).unwrap();
        let params = BracketParams::physical(&ctx);
        let u = common::random_ext(n, &mut rng).scaled(0.5);
        let z = common::random_ext(n, &mut rng);
        let eps = 1e-5;
        let plus = euler_arnold_rhs(&u.axpy(eps, &z), &params).unwrap();
        let minus = euler_arnold_rhs(&u.axpy(-eps, &z), &params).unwrap();
        let fd = (&plus - &minus).scaled(0.5 / eps);
        let js = JacobiState { z, y: ExtElement::zeros(n), t: 0.0 };
        let d = jacobi_rhs(&js, &u, &params).unwrap();
        let scale = fd.frob();
        assert!(common::ext_dist(&d.z, &fd) < 1e-7 * scale, "n={n}");
    }
}

#[test]
fn y_equation_matches_component_form() {
    // Ẏ1 = Z1 - s([B,Y2] + [P,Y1] - [P,Y2]), Ẏ2 = Z2 - s[P,Y2].
    let mut rng = SplitMix64::new(52);
    let n = 6;
    let ctx = Context::new(n).unwrap();
    let params = BracketParams::physical(&ctx);
    let u = common::random_ext(n, &mut rng);
    let js = JacobiState { z: common::random_ext(n, &mut rng), y: common::random_ext(n, &mut rng), t: 0.0 };
    let d = jacobi_rhs(&js, &u, &params).unwrap();
    let s = C64::new(params.scale, 0.0);
    let y2 = &js.z.p - &(comm(&u.p, &js.y.p) * s);
    let y1 = &js.z.b - &((comm(&u.b, &js.y.p) + comm(&u.p, &js.y.b) - comm(&u.p, &js.y.p)) * s);
    assert!(common::dist(&d.y.p, &y2) < 1e-11);
    assert!(common::dist(&d.y.b, &y1) < 1e-11);
}

#[test]
fn steady_specialization_matches_general_equations() {
    let mut rng = SplitMix64::new(53);
    for n in [3, 6, 9] {
        let ctx = Context::new(n).unwrap();
        let params = BracketParams::physical(&ctx);
        let u = steady_geodesic(&ctx);
        let js = JacobiState { z: common::random_ext(n, &mut rng), y: common::random_ext(n, &mut rng), t: 0.0 };
        let a = jacobi_rhs(&js, &u, &params).unwrap();
        let b = steady_jacobi_rhs(&js, &ctx).unwrap();
        assert!(common::ext_dist(&a.z, &b.z) < 1e-10, "n={n}");
        assert!(common::ext_dist(&a.y, &b.y) < 1e-10, "n={n}");
        // The coupled integrator leaves the steady background in place.
        let (u1, s1) = coupled_rk4_step(&u, &js, 0.01, &params).unwrap();
        let s2 = steady_rk4_step(&js, 0.01, &ctx).unwrap();
        assert!(common::ext_dist(&u1, &u) < 1e-13);
        assert!(common::ext_dist(&s1.z, &s2.z) < 1e-10 && common::ext_dist(&s1.y, &s2.y) < 1e-10);
    }
}

#[test]
fn split_variables_decouple() {
    // (𝒟+I) Ż3 = -(𝒟+2I)𝒞 Z3 and 𝒟 Ż4 = -(𝒟-I)𝒞 Z4, blockwise on T_{l,m}.
    let n = 9;
    let ctx = Context::new(n).unwrap();
    let mut rng = SplitMix64::new(54);
    let mut z = common::random_ext(n, &mut rng);
    axizeit_core::mat::remove_trace(&mut z.b);
    let js = JacobiState { z: z.clone(), y: ExtElement::zeros(n), t: 0.0 };
    let dz = steady_jacobi_rhs(&js, &ctx).unwrap().z;
    let s = transform_z34(&z, &ctx).unwrap();
    let ds = transform_z34(&dz, &ctx).unwrap();
    let c3 = ctx.spin.ad(2, &s.v3);
    let c4 = ctx.spin.ad(2, &s.v4);
    for l in 1..n {
        let lf = l as f64;
        for m in -(l as i64)..=l as i64 {
            let coef = |x: &axizeit_core::CMat| ctx.basis.coefficient(l, m, x);
            assert!(((lf + 1.0) * coef(&ds.v3) + (lf + 2.0) * coef(&c3)).abs() < 1e-10, "l={l} m={m}");
            assert!((lf * coef(&ds.v4) + (lf - 1.0) * coef(&c4)).abs() < 1e-10, "l={l} m={m}");
        }
    }
    let back = inverse_34(&s, &ctx).unwrap();
    assert!(common::ext_dist(&back, &z) < 1e-12);
    assert_eq!(transform_y34(&z, &ctx).unwrap(), s);
}

#[test]
fn closed_forms_match_matrix_integration() {
    let n = 9;
    let ctx = Context::new(n).unwrap();
    let dt = 1e-3;
    let t_end = 20.0;
    let steps = (t_end / dt) as usize;
    for l in 1..=4usize {
        for m in 1..=l as i64 {
            for branch in [Branch::Z3, Branch::Z4] {
                // Z(0) on T_{l,m} gives (a_{l,m}, a_{l,-m}) = (1, 0); on T_{l,-m} swapped.
                for (sel, a0) in [(m, (1.0, 0.0)), (-m, (0.0, 1.0))] {
                    let mut js = JacobiState { z: block_initial(l, sel, branch, &ctx).unwrap(), y: ExtElement::zeros(n), t: 0.0 };
                    let mut worst = 0.0f64;
                    for k in 1..=steps {
                        js = steady_rk4_step(&js, dt, &ctx).unwrap();
                        if k % 500 == 0 {
                            let y = transform_y34(&js.y, &ctx).unwrap();
                            let (mat, want) = match branch {
                                Branch::Z3 => (y.v3, steady_jacobi_solution(l, m, a0, js.t).unwrap()),
                                Branch::Z4 => (y.v4, steady_jacobi_solution_d(l, m, a0, js.t).unwrap()),
                            };
                            worst = worst.max((ctx.basis.coefficient(l, m, &mat) - want).abs());
                        }
                    }
                    assert!(worst < 1e-8, "l={l} m={m} {branch:?}: {worst:e}");
                }
            }
        }
    }
}

#[test]
fn closed_form_block_ode() {
    // c' - m c_{-m} = a_m with a' = (l+2)m/(l+1) a_{-m}, solved by adaptive integration.
    for (l, m) in [(1usize, 1i64), (3, 2), (4, 3)] {
        let (lf, mf) = (l as f64, m as f64);
        let k = (lf + 2.0) * mf / (lf + 1.0);
        let f = |v: &[f64]| vec![k * v[1], -k * v[0], v[0] + mf * v[3], v[1] - mf * v[2]];
        for t in [1.0, 7.5, 19.0] {
            let out = common::dopri45(f, &[0.3, -1.1, 0.0, 0.0], t, 1e-13, 1e-15);
            let want = steady_jacobi_solution(l, m, (0.3, -1.1), t).unwrap();
            assert!((out[2] - want).abs() < 1e-9, "l={l} m={m} t={t}");
        }
    }
}

#[test]
fn zeros_of_closed_forms() {
    for (l, m) in [(1usize, 1i64), (2, 1), (2, 2), (3, 2)] {
        for t in block_zero_times(l, m, Branch::Z3, 60.0).unwrap() {
            assert!(steady_jacobi_solution(l, m, (0.8, 0.6), t).unwrap().abs() < 1e-12);
        }
        for t in block_zero_times(l, m, Branch::Z4, 60.0).unwrap() {
            assert!(steady_jacobi_solution_d(l, m, (0.8, 0.6), t).unwrap().abs() < 1e-12);
        }
        // Every conjugate time is among the closed-form zeros.
        let all: Vec<f64> = [Branch::Z3, Branch::Z4]
            .iter()
            .flat_map(|b| block_zero_times(l, m, *b, 200.0).unwrap())
            .collect();
        for (t, _) in conjugate_times(l, m, 2).unwrap() {
            assert!(all.iter().any(|s| (s - t).abs() < 1e-9), "l={l} m={m} t={t}");
        }
    }
}

#[test]
fn detection_finds_block_zeros() {
    let ctx = Context::new(9).unwrap();
    let dt = 1e-3;
    let found = detect_conjugate_with(1, 1, &ctx, dt, 26.0).unwrap();
    let mut want: Vec<(f64, Branch)> = Vec::new();
    for b in [Branch::Z3, Branch::Z4] {
        want.extend(block_zero_times(1, 1, b, 26.0).unwrap().into_iter().map(|t| (t, b)));
    }
    want.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(found.len(), want.len(), "{found:?}");
    // At 4π both branches vanish, so match by (time, branch) rather than order.
    for (t, b) in &want {
        let d = found.iter().find(|d| d.branch == *b && (d.t - t).abs() < dt);
        assert!(d.is_some_and(|d| d.multiplicity == 2), "{t} {b:?}: {found:?}");
    }
    // 4π and 8π are among them.
    for t in [4.0 * PI, 8.0 * PI] {
        assert!(found.iter().any(|d| (d.t - t).abs() < dt));
    }
}

#[test]
fn axisymmetric_block_has_no_zeros() {
    let ctx = Context::new(7).unwrap();
    let found = detect_conjugate_with(2, 0, &ctx, 1e-2, 40.0).unwrap();
    assert!(found.is_empty(), "{found:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn split_round_trip(n in 2usize..10, seed in any::<u64>()) {
        let ctx = Context::new(n).unwrap();
        let mut rng = SplitMix64::new(seed);
        let z = common::random_ext(n, &mut rng);
        let back = inverse_34(&transform_z34(&z, &ctx).unwrap(), &ctx).unwrap();
        prop_assert!(common::ext_dist(&back, &z) < 1e-11);
    }

    #[test]
    fn jacobi_rhs_is_linear(n in 2usize..7, seed in any::<u64>(), a in -2.0f64..2.0) {
        let ctx = Context::new(n).unwrap();
        let params = BracketParams::physical(&ctx);
        let mut rng = SplitMix64::new(seed);
        let u = common::random_ext(n, &mut rng);
        let s1 = JacobiState { z: common::random_ext(n, &mut rng), y: common::random_ext(n, &mut rng), t: 0.0 };
        let s2 = JacobiState { z: common::random_ext(n, &mut rng), y: common::random_ext(n, &mut rng), t: 0.0 };
        let comb = JacobiState { z: s1.z.axpy(a, &s2.z), y: s1.y.axpy(a, &s2.y), t: 0.0 };
        let d1 = jacobi_rhs(&s1, &u, &params).unwrap();
        let d2 = jacobi_rhs(&s2, &u, &params).unwrap();
        let dc = jacobi_rhs(&comb, &u, &params).unwrap();
        let tol = 1e-9 * (d1.z.frob() + d2.z.frob() + d1.y.frob() + d2.y.frob()).max(1.0);
        prop_assert!(common::ext_dist(&dc.z, &d1.z.axpy(a, &d2.z)) < tol);
        prop_assert!(common::ext_dist(&dc.y, &d1.y.axpy(a, &d2.y)) < tol);
    }
}
