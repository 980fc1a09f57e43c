//! Shared helpers for the integration tests: an independent symbolic oracle
//! for ⊞-powers, random polynomial generators and small check records.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stla::engine::{ControlSystem, Structure};
use stla::expr::{parse, Expr};
use stla::hamiltonian::{boxplus_power, BoxplusMethod};
use stla::jet::{lift, lift_vector};

pub mod cli;
pub mod suite;
pub mod values;

pub fn vars(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn ex(text: &str, vs: &[String]) -> Expr {
    parse(text, vs).unwrap_or_else(|e| panic!("`{text}`: {e}"))
}

pub fn field(comps: &[&str], vs: &[String]) -> Vec<Expr> {
    comps.iter().map(|c| ex(c, vs)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// `H_f u = Σ f_i ∂_i u`, symbolically.
pub fn sym_ham(f: &[Expr], u: &Expr) -> Expr {
    f.iter()
        .enumerate()
        .fold(Expr::constant(0.0), |acc, (i, fi)| Expr::add(acc, Expr::mul(fi.clone(), u.symbolic_partial(i))))
}

fn compositions(k: u32, m: usize) -> Vec<Vec<u32>> {
    if m == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for a in 0..=k {
        for mut rest in compositions(k - a, m - 1) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

fn fact(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `Σ k!/(a_1!…a_m!) H_{f_1}^{a_1}∘…∘H_{f_m}^{a_m} u (x)` built from nested
/// symbolic partials; the last field acts first.
pub fn sym_boxplus(fields: &[Vec<Expr>], u: &Expr, k: u32, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for a in compositions(k, fields.len()) {
        let mut e = u.clone();
        for (f, &ai) in fields.iter().zip(&a).rev() {
            for _ in 0..ai {
                e = sym_ham(f, &e);
            }
        }
        let coeff = fact(k) / a.iter().map(|&ai| fact(ai)).product::<f64>();
        total += coeff * e.eval_point(x).expect("oracle evaluation");
    }
    total
}

pub fn jet_boxplus(fields: &[Vec<Expr>], u: &Expr, k: u32, x: &[f64]) -> f64 {
    let fs: Vec<_> = fields.iter().map(|f| lift_vector(f, x, k as i32 - 1).unwrap()).collect();
    boxplus_power(&fs, &lift(u, x, k as i32).unwrap(), k, BoxplusMethod::Multinomial).unwrap()
}

pub fn system(
    vs: &[&str],
    fields: &[(&str, &[&str])],
    structure: Structure,
    radius: f64,
) -> ControlSystem {
    ControlSystem::parse(vs, fields, &BTreeMap::new(), structure, radius).unwrap()
}

pub fn affine(vs: &[&str], fields: &[(&str, &[&str])], radius: f64) -> ControlSystem {
    let structure = Structure::Affine {
        drift: fields[0].0.to_string(),
        controls: fields[1..].iter().map(|f| f.0.to_string()).collect(),
    };
    system(vs, fields, structure, radius)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random polynomial text in `vs` with total degree at most `deg` and small
/// integer-over-four coefficients.
pub fn random_poly(rng: &mut StdRng, vs: &[String], deg: u32) -> String {
    let terms = rng.random_range(1..=4);
    let mut parts = Vec::new();
    for _ in 0..terms {
        let c = rng.random_range(-8i32..=8) as f64 / 4.0;
        if c == 0.0 {
            continue;
        }
        let d = rng.random_range(0..=deg);
        let mut mono = format!("{c}");
        for _ in 0..d {
            mono.push('*');
            mono.push_str(&vs[rng.random_range(0..vs.len())]);
        }
        parts.push(format!("({mono})"));
    }
    if parts.is_empty() {
        parts.push("1".into());
    }
    parts.join(" + ")
}

pub fn random_field(rng: &mut StdRng, vs: &[String], deg: u32) -> Vec<Expr> {
    (0..vs.len()).map(|_| ex(&random_poly(rng, vs, deg), vs)).collect()
}

pub fn random_point(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// One named comparison.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub got: Vec<f64>,
    pub want: Vec<f64>,
    pub error: f64,
    pub ok: bool,
}

pub fn check(name: impl Into<String>, got: Vec<f64>, want: Vec<f64>, tol: f64) -> Check {
    let error = if got.len() == want.len() {
        got.iter().zip(&want).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Check { name: name.into(), got, want, error, ok: error <= tol }
}

/// Prints a single criterion verdict line.
pub fn verdict(id: u32, title: &str, ok: bool, detail: &str) {
    println!("criterion {id} [{}] {title}: {detail}", if ok { "PASS" } else { "FAIL" });
}
