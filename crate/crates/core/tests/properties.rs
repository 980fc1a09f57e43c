//! Property tests for the documented invariants of each layer.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use stla::engine::{
    certify, check_group, estimate_bounds, EngineOptions, GroupSpec, ManifoldVariant, Structure, TargetDef,
};
use stla::expr::Expr;
use stla::jet::{lift, Mono, TruncatedPoly};
use stla::lab::{integrate_switched, SimOptions, SwitchSchedule};
use stla::petrov::{solve, PetrovProblem};
use stla::span::is_positive_basis;

/// Half-plane target `{x ≤ 1}` touched by the rotation at (1, 0).
const U_ROT: &str = "x - 1";

const NAMES: [&str; 4] = ["x", "y", "z", "w"];

/// Random polynomial with an optional sine or cosine factor.
fn random_expr_text(seed: u64, n: usize) -> String {
    let mut r = rng(seed);
    let vs = vars(&NAMES[..n]);
    let p = random_poly(&mut r, &vs, 3);
    match r.random_range(0..3) {
        0 => p,
        1 => format!("{p} + sin({})", random_poly(&mut r, &vs, 2)),
        _ => format!("({p})*cos({})", vs[r.random_range(0..n)]),
    }
}

fn random_int_poly(r: &mut rand::rngs::StdRng, n: usize, cap: i32) -> TruncatedPoly {
    let terms: Vec<(Vec<u32>, f64)> = (0..6)
        .map(|_| {
            let alpha = (0..n).map(|_| r.random_range(0..3u32)).collect();
            (alpha, r.random_range(-5i32..=5) as f64)
        })
        .collect();
    TruncatedPoly::from_terms(n, cap, terms)
}

fn coefficients_equal(a: &TruncatedPoly, b: &TruncatedPoly, tol: f64) -> bool {
    let n = a.n_vars();
    let keys: Vec<Vec<u32>> = a.terms().chain(b.terms()).map(|(m, _)| m.to_vec(n)).collect();
    keys.iter().all(|k| (a.coeff(k) - b.coeff(k)).abs() <= tol * a.coeff(k).abs().max(1.0))
}

fn random_matrix(seed: u64, h: usize, m: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(h, m, |_, _| r.random_range(-1.0..1.0))
}

fn multi_indices(n: usize, d: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for a in 0..=d {
        for mut rest in multi_indices(n - 1, d - a) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn symbolic_partial_matches_central_difference(seed in any::<u64>(), n in 1usize..=4) {
        let vs = vars(&NAMES[..n]);
        let e = ex(&random_expr_text(seed, n), &vs);
        let mut r = rng(seed ^ 0x5eed);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let h = 1e-5;
        for v in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[v] += h;
            xm[v] -= h;
            let fd = (e.eval_point(&xp).unwrap() - e.eval_point(&xm).unwrap()) / (2.0 * h);
            let d = e.symbolic_partial(v).eval_point(&x).unwrap();
            prop_assert!(rel_err(d, fd) < 1e-6, "{d} vs {fd}");
        }
    }

    #[test]
    fn printing_then_parsing_is_stable(seed in any::<u64>(), n in 1usize..=4) {
        let vs = vars(&NAMES[..n]);
        let e = ex(&random_expr_text(seed, n), &vs);
        let printed = e.display(&vs).to_string();
        prop_assert_eq!(ex(&printed, &vs), e);
    }

    #[test]
    fn lift_matches_iterated_symbolic_partials(seed in any::<u64>(), n in 1usize..=4) {
        let vs = vars(&NAMES[..n]);
        let mut r = rng(seed);
        let e = ex(&random_poly(&mut r, &vs, 4), &vs);
        let x0 = random_point(&mut r, n);
        let g = lift(&e, &x0, 4).unwrap();
        for d in 0..=4 {
            for alpha in multi_indices(n, d) {
                let want = e.symbolic_multi_partial(&alpha).eval_point(&x0).unwrap() / Mono::from_slice(&alpha).factorial();
                prop_assert!(rel_err(g.poly.coeff(&alpha), want) <= 1e-12, "{alpha:?}");
            }
        }
    }

    #[test]
    fn integer_germs_form_a_ring(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let [a, b, c] = [0; 3].map(|_| random_int_poly(&mut r, n, 4));
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(coefficients_equal(&left, &right, 0.0));
        let dist = a.mul(&b.add(&c).unwrap()).unwrap();
        let split = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert!(coefficients_equal(&dist, &split, 0.0));
    }

    #[test]
    fn partial_obeys_leibniz(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let a = random_int_poly(&mut r, n, 5).scale(r.random_range(0.1..2.0));
        let b = random_int_poly(&mut r, n, 5).scale(r.random_range(0.1..2.0));
        for i in 0..n {
            let lhs = a.mul(&b).unwrap().partial(i);
            let rhs = a.partial(i).mul(&b).unwrap().add(&a.mul(&b.partial(i)).unwrap()).unwrap();
            prop_assert!(coefficients_equal(&lhs, &rhs, 1e-12));
        }
    }

    #[test]
    fn positive_scaling_keeps_the_span_verdict(seed in any::<u64>(), h in 1usize..=4, extra in 0usize..=4) {
        let m = (h + extra).min(8);
        let a = random_matrix(seed, h, m);
        let base = is_positive_basis(&a).unwrap();
        let mut r = rng(seed ^ 1);
        let mut scaled = a.clone();
        for j in 0..m {
            let c = r.random_range(0.1..10.0);
            scaled.column_mut(j).scale_mut(c);
        }
        let after = is_positive_basis(&scaled).unwrap();
        if base.margin.abs() > 1e-6 && after.margin.abs() > 1e-6 {
            prop_assert_eq!(base.verdict, after.verdict);
        }
    }

    #[test]
    fn adding_a_column_keeps_a_positive_basis(seed in any::<u64>(), h in 1usize..=4, extra in 1usize..=3) {
        let a = random_matrix(seed, h, h + extra);
        let base = is_positive_basis(&a).unwrap();
        prop_assume!(base.verdict && base.margin > 1e-6);
        let col = random_matrix(seed ^ 2, h, 1);
        prop_assume!(col.norm() > 1e-3);
        let wider = DMatrix::from_fn(h, h + extra + 1, |i, j| if j < h + extra { a[(i, j)] } else { col[(i, 0)] });
        prop_assert!(is_positive_basis(&wider).unwrap().verdict);
    }

    #[test]
    fn petrov_solutions_meet_their_contract(seed in any::<u64>(), h in 1usize..=3, extra in 1usize..=3, c in 0.05f64..1.0) {
        let a = random_matrix(seed, h, h + extra);
        prop_assume!(is_positive_basis(&a).map(|s| s.verdict && s.margin > 1e-3).unwrap_or(false));
        let mut r = rng(seed ^ 3);
        let v = DVector::from_fn(h, |_, _| r.random_range(-1e-3..1e-3));
        let sol = solve(&PetrovProblem::constant(a.clone(), v.clone())).unwrap();
        prop_assert!(sol.tau.iter().all(|t| *t >= 0.0));
        let res = (&a * DVector::from_column_slice(&sol.tau) - &v).norm();
        prop_assert!(res <= 1e-12, "residual {res}");
        prop_assert!(sol.tau_norm() <= sol.bound_k * sol.rho_sup * (1.0 + 1e-12));
        let small = solve(&PetrovProblem::constant(a, v * c)).unwrap();
        let ratio = (small.bound_k * small.rho_sup) / (sol.bound_k * sol.rho_sup);
        prop_assert!((ratio - c).abs() <= 1e-9 * c, "bound ratio {ratio} for c = {c}");
    }
}

fn rotation_system(lambda: f64) -> stla::engine::ControlSystem {
    let (p, m) = (format!("-3*{lambda}*y"), format!("3*{lambda}*x"));
    let (q, s) = (format!("{lambda}*y"), format!("-{lambda}*x"));
    system(
        &["x", "y"],
        &[("a", &["-3*y", "3*x"]), ("b", &["y", "-x"]), ("la", &[p.as_str(), m.as_str()]), ("lb", &[q.as_str(), s.as_str()])],
        Structure::General,
        1.0,
    )
}

#[test]
fn certificate_replay_is_bit_for_bit() {
    let sys = rotation_system(1.0);
    let vs = vars(&["x", "y"]);
    let target = TargetDef::fat(ex(U_ROT, &vs));
    let groups = vec![GroupSpec::new(["a", "b"], 2).unwrap(), GroupSpec::new(["la", "lb"], 2).unwrap()];
    let opts = EngineOptions::default();
    let cert = certify(&sys, &target, &[1.0, 0.0], &groups, &ManifoldVariant::Auto, &opts).unwrap();
    let us = vec![ex(U_ROT, &vs)];
    for g in &cert.groups {
        let again = check_group(&sys, &us, &[1.0, 0.0], &g.group, opts.tol).unwrap();
        assert_eq!(again.raw.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>(), g.raw.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scaled_groups_scale_columns_by_lambda_to_the_k(lambda in 0.1f64..5.0, angle in 0.0f64..6.28) {
        let sys = rotation_system(lambda);
        let vs = vars(&["x", "y"]);
        let us = vec![ex(U_ROT, &vs)];
        // Order 1 vanishes on the axis y = 0.
        let x = [1.0 + 0.3 * angle.cos(), 0.0];
        let base = check_group(&sys, &us, &x, &GroupSpec::new(["a", "b"], 2).unwrap(), 1e-9).unwrap();
        let scaled = check_group(&sys, &us, &x, &GroupSpec::new(["la", "lb"], 2).unwrap(), 1e-9).unwrap();
        prop_assert!(rel_err(scaled.column[0], lambda * lambda * base.column[0]) < 1e-9);
        prop_assert!(base.column[0].signum() == scaled.column[0].signum());
    }

    #[test]
    fn extra_groups_never_break_a_certificate(pick in proptest::collection::vec(0usize..4, 1..4)) {
        let sys = rotation_system(1.0);
        let vs = vars(&["x", "y"]);
        let target = TargetDef::fat(ex(U_ROT, &vs));
        let extras = [
            GroupSpec::new(["a"], 1).unwrap(),
            GroupSpec::new(["b", "a"], 2).unwrap(),
            GroupSpec::new(["la"], 2).unwrap(),
            GroupSpec::new(["lb", "a", "b"], 3).unwrap(),
        ];
        let mut groups = vec![GroupSpec::new(["a", "b"], 2).unwrap()];
        let opts = EngineOptions::default();
        prop_assert!(certify(&sys, &target, &[1.0, 0.0], &groups, &ManifoldVariant::Auto, &opts).is_ok());
        groups.extend(pick.iter().map(|&i| extras[i].clone()));
        prop_assert!(certify(&sys, &target, &[1.0, 0.0], &groups, &ManifoldVariant::Auto, &opts).is_ok());
    }

    // Translated trajectories stay within L e^{Lt} |x − x_o| t of the true one.
    #[test]
    fn translation_comparison_bound(seed in any::<u64>(), t in 0.01f64..0.2, d in 1e-3f64..5e-2) {
        let vs = vars(&["x", "y"]);
        let mut r = rng(seed);
        let texts: Vec<[String; 2]> = (0..2).map(|_| [random_poly(&mut r, &vs, 2), random_poly(&mut r, &vs, 2)]).collect();
        let sys = system(
            &["x", "y"],
            &[("f", &[texts[0][0].as_str(), texts[0][1].as_str()]), ("g", &[texts[1][0].as_str(), texts[1][1].as_str()])],
            Structure::General,
            1.0,
        );
        let x_o = random_point(&mut r, 2).iter().map(|v| v * 0.2).collect::<Vec<_>>();
        let dir = random_point(&mut r, 2);
        let nd = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let x: Vec<f64> = x_o.iter().zip(&dir).map(|(a, b)| a + d * b / nd).collect();
        let bounds = estimate_bounds(&sys, &x_o, 0).unwrap();
        let sched = SwitchSchedule::balanced(&["f".into(), "g".into()], t / 2.0).unwrap();
        prop_assume!(bounds.sup_norm * t < 0.4);
        let opts = SimOptions { steps_per_leg: 200, ..SimOptions::default() };
        let xo_t = integrate_switched(&sys, &sched, &x_o, &opts).unwrap().end;
        let x_t = integrate_switched(&sys, &sched, &x, &opts).unwrap().end;
        let gap = (0..2).map(|i| (x_t[i] - (xo_t[i] + x[i] - x_o[i])).powi(2)).sum::<f64>().sqrt();
        let l = bounds.lipschitz;
        prop_assert!(gap <= 1.05 * l * (l * t).exp() * d * t + 1e-12, "gap {gap}");
    }

    // u(x_t) − u(x) − (u(x^o_t) − u(x_o)) is O(|x − x_o| t).
    #[test]
    fn u_variation_comparison_bound(seed in any::<u64>(), t in 0.01f64..0.2, d in 1e-3f64..5e-2) {
        let vs = vars(&["x", "y"]);
        let mut r = rng(seed);
        let texts: Vec<[String; 2]> = (0..2).map(|_| [random_poly(&mut r, &vs, 2), random_poly(&mut r, &vs, 2)]).collect();
        let sys = system(
            &["x", "y"],
            &[("f", &[texts[0][0].as_str(), texts[0][1].as_str()]), ("g", &[texts[1][0].as_str(), texts[1][1].as_str()])],
            Structure::General,
            1.0,
        );
        let u = ex(&random_poly(&mut r, &vs, 2), &vs);
        let x_o = vec![0.0, 0.0];
        let dir = random_point(&mut r, 2);
        let nd = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let x: Vec<f64> = dir.iter().map(|b| d * b / nd).collect();
        let bounds = estimate_bounds(&sys, &x_o, 0).unwrap();
        prop_assume!(bounds.sup_norm * t < 0.4);
        // Sup norms of Du and D²u over the unit ball, padded like the field bounds.
        let grad: Vec<Expr> = (0..2).map(|i| u.symbolic_partial(i)).collect();
        let hess: Vec<Expr> = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| grad[i].symbolic_partial(j)).collect();
        let pts = stla::sampling::halton_ball(&x_o, 1.0, 512);
        let mut du: f64 = 0.0;
        let mut d2u: f64 = 0.0;
        for p in &pts {
            du = du.max(grad.iter().map(|g| g.eval_point(p).unwrap().powi(2)).sum::<f64>().sqrt());
            let hm = DMatrix::from_iterator(2, 2, hess.iter().map(|h| h.eval_point(p).unwrap()));
            d2u = d2u.max(hm.svd(false, false).singular_values.max());
        }
        let c = 1.25 * (d2u * bounds.sup_norm + du * bounds.lipschitz);
        let sched = SwitchSchedule::balanced(&["f".into(), "g".into()], t / 2.0).unwrap();
        let opts = SimOptions { steps_per_leg: 200, ..SimOptions::default() };
        let xo_t = integrate_switched(&sys, &sched, &x_o, &opts).unwrap().end;
        let x_t = integrate_switched(&sys, &sched, &x, &opts).unwrap().end;
        let ev = |p: &[f64]| u.eval_point(p).unwrap();
        let alpha = ev(&x_t) - ev(&x) - (ev(&xo_t) - ev(&x_o));
        let l = bounds.lipschitz;
        prop_assert!(alpha.abs() <= c * (l * t).exp() * d * t + 1e-12, "alpha {alpha}, C {c}");
    }
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let sys = system(&["x", "y"], &[("rot", &["-y", "x"])], Structure::General, 10.0);
    let sched = SwitchSchedule::balanced(&["rot".into()], 2.0).unwrap();
    let exact = [2f64.cos(), 2f64.sin()];
    let mut pts = Vec::new();
    for steps in [8, 16, 32, 64, 128] {
        let end = integrate_switched(&sys, &sched, &[1.0, 0.0], &SimOptions { steps_per_leg: steps, ..SimOptions::default() })
            .unwrap()
            .end;
        let err = ((end[0] - exact[0]).powi(2) + (end[1] - exact[1]).powi(2)).sqrt();
        pts.push((2.0 / steps as f64, err));
    }
    let (slope, _) = stla::lab::loglog_fit(&pts).unwrap();
    assert!((slope - 4.0).abs() <= 0.3, "slope {slope}");
}
