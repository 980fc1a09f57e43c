//! Worked-example values, each computed by the jet pipeline and by the
//! symbolic oracle and compared with its closed form.

use stla::engine::{group_coefficients, GroupSpec};
use stla::hamiltonian::{lie_derivative, trajectory_coeffs};
use stla::jet::{lift, lift_vector};

use super::*;

pub const TOL: f64 = 1e-9;

fn both(name: &str, fields: &[Vec<Expr>], u: &Expr, k: u32, x: &[f64], want: f64, out: &mut Vec<Check>) {
    out.push(check(format!("{name} at {x:?} (jets)"), vec![jet_boxplus(fields, u, k, x)], vec![want], TOL));
    out.push(check(format!("{name} at {x:?} (symbolic)"), vec![sym_boxplus(fields, u, k, x)], vec![want], TOL));
}

/// Raw matrix of a group list on vector functions, both pipelines.
fn matrix(
    name: &str,
    sys: &stla::engine::ControlSystem,
    fields_by_name: &[(&str, Vec<Expr>)],
    us: &[Expr],
    groups: &[(&[&str], u32)],
    x: &[f64],
    want: &[Vec<f64>],
    out: &mut Vec<Check>,
) {
    let find = |n: &str| fields_by_name.iter().find(|(m, _)| *m == n).unwrap().1.clone();
    for ((names, k), w) in groups.iter().zip(want) {
        let g = GroupSpec::new(names.iter().copied(), *k).unwrap();
        let (raw, _) = group_coefficients(sys, us, x, &g.fields, *k).unwrap();
        out.push(check(format!("{name} {} (jets)", g.label()), raw[*k as usize - 1].clone(), w.clone(), TOL));
        let fs: Vec<Vec<Expr>> = names.iter().map(|n| find(n)).collect();
        let sym: Vec<f64> = us.iter().map(|u| sym_boxplus(&fs, u, *k, x)).collect();
        out.push(check(format!("{name} {} (symbolic)", g.label()), sym, w.clone(), TOL));
    }
}

pub fn criterion1_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let v2 = vars(&["x", "y"]);
    let v3 = vars(&["x", "y", "z"]);

    // Rotation with a parallel control: f0 ± f1 = (1 ± 2)(−y, x), u = x.
    let plus = field(&["-3*y", "3*x"], &v2);
    let minus = field(&["y", "-x"], &v2);
    let u = ex("x", &v2);
    for x in [[1.0, 0.0], [0.7, -0.3], [-1.2, 0.5]] {
        both("rotation pair, order 2 = -4x", &[plus.clone(), minus.clone()], &u, 2, &x, -4.0 * x[0], &mut out);
    }

    // Cubic drift with vertical control on the disk.
    let f = field(&["y^3", "1"], &v2);
    let g = field(&["y^3", "-1"], &v2);
    let u = ex("(x^2 + y^2 - 0.25)/2", &v2);
    for x in [[0.5f64, 0.0], [-0.5, 0.0], [0.3, -0.7], [0.1, 0.4]] {
        let want = 12.0 * x[0] + 204.0 * x[1].powi(4);
        both("cubic drift, order 4 = 12x + 204y^4", &[f.clone(), g.clone()], &u, 4, &x, want, &mut out);
    }
    let o = [0.0, 0.0];
    let fg = [lift_vector(&f, &o, 4).unwrap(), lift_vector(&g, &o, 4).unwrap()];
    let traj = trajectory_coeffs(&fg, 4).unwrap();
    out.push(check("cubic drift, point target order-4 coefficient (jets)", traj[3].clone(), vec![12.0, 0.0], TOL));
    let sym: Vec<f64> = ["x", "y"].iter().map(|c| sym_boxplus(&[f.clone(), g.clone()], &ex(c, &v2), 4, &o)).collect();
    out.push(check("cubic drift, point target order-4 coefficient (symbolic)", sym, vec![12.0, 0.0], TOL));
    let lower: Vec<f64> = traj[..3].iter().flatten().copied().collect();
    out.push(check("cubic drift, point target orders 1-3 vanish", lower, vec![0.0; 6], TOL));

    // Oscillator: H_F u = a y (x^3 − a y) with F = (y, a x^3 − x − a^2 y).
    let u = ex("(x^2 + y^2 - 1)/2", &v2);
    for a in [-1.0f64, -0.4, 0.3, 1.0] {
        let fa = field(&["y", &format!("({a})*x^3 - x - ({a})^2*y")], &v2);
        for x in [[0.8f64, 0.3], [-0.2, 0.9]] {
            let want = a * x[1] * (x[0].powi(3) - a * x[1]);
            let jet = lie_derivative(&lift_vector(&fa, &x, 1).unwrap(), &lift(&u, &x, 1).unwrap())
                .unwrap()
                .value()
                .unwrap();
            out.push(check(format!("oscillator H_F u, a = {a}, at {x:?} (jets)"), vec![jet], vec![want], TOL));
            let sym = sym_ham(&fa, &u).eval_point(&x).unwrap();
            out.push(check(format!("oscillator H_F u, a = {a}, at {x:?} (symbolic)"), vec![sym], vec![want], TOL));
        }
    }
    let p = field(&["y", "x^3 - x - y"], &v2);
    let q = field(&["y", "-x^3 - x - y"], &v2);
    for x in [[1.0, 0.0], [-1.0, 0.0]] {
        both("oscillator (q, p), order 2 = -2r^4", &[q.clone(), p.clone()], &u, 2, &x, -2.0, &mut out);
    }

    // Cylinder: group (f0 + f2, f0 − f1), order 2 = −2(x^2 + y^2) on z = 0.
    let a = field(&["-y/12", "x/12", "1"], &v3);
    let b = field(&["-y/12 - x*z", "x/12 - y*z", "0"], &v3);
    let u = ex("(x^2 + y^2 - 1)/2", &v3);
    for x in [[1.0, 0.0, 0.0], [0.3, -0.7, 0.0], [-0.6, 0.8, 0.0]] {
        let want = -2.0 * (x[0] * x[0] + x[1] * x[1]);
        both("cylinder (f0+f2, f0-f1), order 2 = -2(x^2+y^2)", &[a.clone(), b.clone()], &u, 2, &x, want, &mut out);
    }

    // Axis in R^3: u = (x, y).
    let sys6 = affine(&["x", "y", "z"], &[("fo", &["y", "0", "-z"]), ("f1", &["0", "1", "0"])], 0.5);
    let named6 = vec![("fo+f1", field(&["y", "1", "-z"], &v3)), ("fo-f1", field(&["y", "-1", "-z"], &v3))];
    let us6 = vec![ex("x", &v3), ex("y", &v3)];
    for z in [0.0, 0.5, -1.3] {
        matrix(
            "axis",
            &sys6,
            &named6,
            &us6,
            &[(&["fo+f1"], 1), (&["fo-f1"], 1), (&["fo+f1", "fo-f1"], 2), (&["fo-f1", "fo+f1"], 2)],
            &[0.0, 0.0, z],
            &[vec![0.0, 1.0], vec![0.0, -1.0], vec![2.0, 0.0], vec![-2.0, 0.0]],
            &mut out,
        );
    }

    // Curve in R^3: u = (y − x^2, z).
    let sys7 = affine(&["x", "y", "z"], &[("fo", &["0", "z", "0"]), ("f1", &["0", "0", "1"])], 0.5);
    let named7 = vec![("fo+f1", field(&["0", "z", "1"], &v3)), ("fo-f1", field(&["0", "z", "-1"], &v3))];
    matrix(
        "curve",
        &sys7,
        &named7,
        &[ex("y - x^2", &v3), ex("z", &v3)],
        &[(&["fo+f1"], 1), (&["fo-f1"], 1), (&["fo+f1", "fo-f1"], 2), (&["fo-f1", "fo+f1"], 2)],
        &[0.0, 0.0, 0.0],
        &[vec![0.0, 1.0], vec![0.0, -1.0], vec![2.0, 0.0], vec![-2.0, 0.0]],
        &mut out,
    );
    out
}
