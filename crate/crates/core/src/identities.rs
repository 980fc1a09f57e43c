//! Algebraic identities of the ⊞ calculus, each evaluated on both sides at the base point.
//!
//! Fields should carry jets of degree at least [`SUITE_CAP`] and scalar
//! functions one more, which covers every check below.

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::hamiltonian::{
    ad_power, boxplus_power, boxplus_sequence_vector, directional, ham_power, lie_bracket, lie_derivative,
    linear_constraint_field, trajectory_coeffs, BoxplusMethod,
};
use crate::jet::{lift, lift_vector, JetError, ScalarGerm, VectorGerm};

pub const SUITE_CAP: i32 = 5;

/// Relative tolerance of a passing check.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `max|lhs − rhs| / max(1, |lhs|, |rhs|)`
    pub error: f64,
    pub passed: bool,
}

pub fn compare(name: impl Into<String>, lhs: Vec<f64>, rhs: Vec<f64>) -> IdentityCheck {
    let diff = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = lhs.iter().chain(&rhs).map(|v| v.abs()).fold(1.0, f64::max);
    let error = if lhs.len() == rhs.len() { diff / scale } else { f64::INFINITY };
    IdentityCheck { name: name.into(), lhs, rhs, error, passed: error <= IDENTITY_TOL }
}

/// Lifts fields to [`SUITE_CAP`] and `u` to one degree more.
pub fn lift_inputs(fields: &[Vec<Expr>], u: &Expr, x0: &[f64]) -> Result<(Vec<VectorGerm>, ScalarGerm), JetError> {
    let fs = fields.iter().map(|f| lift_vector(f, x0, SUITE_CAP)).collect::<Result<_, _>>()?;
    Ok((fs, lift(u, x0, SUITE_CAP + 1)?))
}

fn neg(f: &VectorGerm) -> VectorGerm {
    f.scale(-1.0)
}

fn identity_us(base: &[f64]) -> Vec<ScalarGerm> {
    VectorGerm::identity(base, SUITE_CAP + 1)
        .comps
        .into_iter()
        .map(|p| ScalarGerm::new(base.to_vec(), p))
        .collect()
}

fn h_vec(v: &VectorGerm, u: &ScalarGerm) -> Result<f64, JetError> {
    lie_derivative(v, u)?.value()
}

/// Multinomial and recursive evaluation agree.
pub fn methods_agree(fields: &[VectorGerm], u: &ScalarGerm, k: u32) -> Result<IdentityCheck, JetError> {
    let a = boxplus_power(fields, u, k, BoxplusMethod::Multinomial)?;
    let b = boxplus_power(fields, u, k, BoxplusMethod::Recursive)?;
    Ok(compare(format!("multinomial = recursive, m = {}, k = {k}", fields.len()), vec![a], vec![b]))
}

/// `(H_f⊞H_g)²u = H²_{f+g}u + [f,g]·∇u`
pub fn second_order_pair(f: &VectorGerm, g: &VectorGerm, u: &ScalarGerm) -> Result<IdentityCheck, JetError> {
    let lhs = boxplus_power(&[f.clone(), g.clone()], u, 2, BoxplusMethod::Multinomial)?;
    let rhs = ham_power(&f.add(g)?, u, 2)? + h_vec(&lie_bracket(f, g)?, u)?;
    Ok(compare("second order pair", vec![lhs], vec![rhs]))
}

/// `(H_{f_1}⊞…⊞H_{f_m})²u = H²_{Σf_i}u + Σ_{i<j}[f_i,f_j]·∇u`
pub fn second_order_multi(fields: &[VectorGerm], u: &ScalarGerm) -> Result<IdentityCheck, JetError> {
    let lhs = boxplus_power(fields, u, 2, BoxplusMethod::Multinomial)?;
    let mut sum = fields[0].clone();
    for f in &fields[1..] {
        sum = sum.add(f)?;
    }
    let mut rhs = ham_power(&sum, u, 2)?;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            rhs += h_vec(&lie_bracket(&fields[i], &fields[j])?, u)?;
        }
    }
    Ok(compare(format!("second order, m = {}", fields.len()), vec![lhs], vec![rhs]))
}

/// `(H_{λf}⊞H_{λg})^k u = λ^k (H_f⊞H_g)^k u`
pub fn homogeneity(f: &VectorGerm, g: &VectorGerm, u: &ScalarGerm, lambda: f64, k: u32) -> Result<IdentityCheck, JetError> {
    let lhs = boxplus_power(&[f.scale(lambda), g.scale(lambda)], u, k, BoxplusMethod::Multinomial)?;
    let rhs = lambda.powi(k as i32) * boxplus_power(&[f.clone(), g.clone()], u, k, BoxplusMethod::Multinomial)?;
    Ok(compare(format!("homogeneity, k = {k}"), vec![lhs], vec![rhs]))
}

/// `(H_{−f}⊞H_{−g})^k u = (−1)^k (H_f⊞H_g)^k u`
pub fn sign_rule(f: &VectorGerm, g: &VectorGerm, u: &ScalarGerm, k: u32) -> Result<IdentityCheck, JetError> {
    let lhs = boxplus_power(&[neg(f), neg(g)], u, k, BoxplusMethod::Multinomial)?;
    let rhs = (-1f64).powi(k as i32) * boxplus_power(&[f.clone(), g.clone()], u, k, BoxplusMethod::Multinomial)?;
    Ok(compare(format!("sign rule, k = {k}"), vec![lhs], vec![rhs]))
}

/// `(H_f⊞H_f)^k u = 2^k H^{(k)}_f u`
pub fn doubling(f: &VectorGerm, u: &ScalarGerm, k: u32) -> Result<IdentityCheck, JetError> {
    let lhs = boxplus_power(&[f.clone(), f.clone()], u, k, BoxplusMethod::Multinomial)?;
    let rhs = 2f64.powi(k as i32) * ham_power(f, u, k)?;
    Ok(compare(format!("repeated field, k = {k}"), vec![lhs], vec![rhs]))
}

/// `(f,g,−f,−g)` on the identity: order 1 vanishes, order 2 is `2[f,g]`.
pub fn bracket_quadruple(f: &VectorGerm, g: &VectorGerm) -> Result<IdentityCheck, JetError> {
    let c = trajectory_coeffs(&[f.clone(), g.clone(), neg(f), neg(g)], 2)?;
    let br = lie_bracket(f, g)?.value()?;
    let n = br.len();
    let lhs = c[0].iter().chain(&c[1]).copied().collect();
    let rhs = std::iter::repeat(0.0).take(n).chain(br.iter().map(|v| 2.0 * v)).collect();
    Ok(compare("quadruple (f,g,-f,-g) = 2[f,g]", lhs, rhs))
}

/// Same quadruple on a scalar function: order 2 is `2[f,g]·∇u`.
pub fn bracket_quadruple_scalar(f: &VectorGerm, g: &VectorGerm, u: &ScalarGerm) -> Result<IdentityCheck, JetError> {
    let c = boxplus_sequence_vector(&[f.clone(), g.clone(), neg(f), neg(g)], std::slice::from_ref(u), 2)?;
    let rhs = 2.0 * h_vec(&lie_bracket(f, g)?, u)?;
    Ok(compare("quadruple (f,g,-f,-g) on u", vec![c.orders[0][0], c.orders[1][0]], vec![0.0, rhs]))
}

/// `(f,g,−f,−g,h,g,f,−g,−f,−h)` on the identity: orders 1, 2 vanish, order 3 is `6[[f,g],h]`.
pub fn bracket_ten(f: &VectorGerm, g: &VectorGerm, h: &VectorGerm) -> Result<IdentityCheck, JetError> {
    let seq = [
        f.clone(),
        g.clone(),
        neg(f),
        neg(g),
        h.clone(),
        g.clone(),
        f.clone(),
        neg(g),
        neg(f),
        neg(h),
    ];
    let c = trajectory_coeffs(&seq, 3)?;
    let br = lie_bracket(&lie_bracket(f, g)?, h)?.value()?;
    let n = br.len();
    let lhs = c.iter().flatten().copied().collect();
    let rhs = std::iter::repeat(0.0).take(2 * n).chain(br.iter().map(|v| 6.0 * v)).collect();
    Ok(compare("ten-field sequence = 6[[f,g],h]", lhs, rhs))
}

/// For `f(x_0) + g(x_0) = 0`: `(H_f⊞H_g)^{k+1}u(x_0) = (−1)^k H_{ad^k_g f}u(x_0)`.
/// Returns `None` when the pair is not balanced at the base point.
pub fn ad_reduction(f: &VectorGerm, g: &VectorGerm, u: &ScalarGerm, k: u32) -> Result<Option<IdentityCheck>, JetError> {
    let s = f.add(g)?.value()?;
    let scale = f.value()?.iter().chain(&g.value()?).map(|v| v.abs()).fold(1.0, f64::max);
    if s.iter().any(|v| v.abs() > IDENTITY_TOL * scale) {
        return Ok(None);
    }
    let lhs = boxplus_power(&[f.clone(), g.clone()], u, k + 1, BoxplusMethod::Multinomial)?;
    let rhs = (-1f64).powi(k as i32) * h_vec(&ad_power(g, f, k)?, u)?;
    Ok(Some(compare(format!("balanced pair ad reduction, k = {k}"), vec![lhs], vec![rhs])))
}

/// `(H_f⊞H_g)^k I = F_k` with the linear-constraint recursion.
pub fn linear_constraint(f: &VectorGerm, g: &VectorGerm, k: u32) -> Result<IdentityCheck, JetError> {
    let c = trajectory_coeffs(&[f.clone(), g.clone()], k)?;
    let fk = linear_constraint_field(f, g, k)?.value()?;
    Ok(compare(format!("linear constraint recursion, k = {k}"), c[k as usize - 1].clone(), fk))
}

/// `(1/3!)(H_f⊞H_g)³I = (1/3!)H³_{f+g}I + ½(D[f,g](f+g) + D(f+g)[f,g])/2 + (ad²_f g + ad²_g f)/12`
pub fn bch_third(f: &VectorGerm, g: &VectorGerm) -> Result<IdentityCheck, JetError> {
    let c = trajectory_coeffs(&[f.clone(), g.clone()], 3)?;
    let lhs: Vec<f64> = c[2].iter().map(|v| v / 6.0).collect();
    let s = f.add(g)?;
    let br = lie_bracket(f, g)?;
    let single = trajectory_coeffs(std::slice::from_ref(&s), 3)?;
    let mixed = directional(&br, &s)?.add(&directional(&s, &br)?)?.value()?;
    let ad = ad_power(f, g, 2)?.add(&ad_power(g, f, 2)?)?.value()?;
    let rhs = (0..lhs.len())
        .map(|i| single[2][i] / 6.0 + 0.25 * mixed[i] + ad[i] / 12.0)
        .collect();
    Ok(compare("third BCH term", lhs, rhs))
}

/// For `f_o(x_o) = 0`, `f = f_o + εf_1`, `g = f_o − εf_1`: the sequence `(f,g,g,f)` on the
/// identity has vanishing orders 1, 2 and order 3 `12ε ad²_{f_o}f_1 + 4ε² ad²_{f_1}f_o`.
pub fn affine_quadruple(fo: &VectorGerm, f1: &VectorGerm, eps: f64) -> Result<Option<IdentityCheck>, JetError> {
    let v = fo.value()?;
    if v.iter().any(|x| x.abs() > IDENTITY_TOL * fo.max_abs_coeff().max(1.0)) {
        return Ok(None);
    }
    let f = fo.axpy(eps, f1)?;
    let g = fo.axpy(-eps, f1)?;
    let c = trajectory_coeffs(&[f.clone(), g.clone(), g, f], 3)?;
    let a = ad_power(fo, f1, 2)?.value()?;
    let b = ad_power(f1, fo, 2)?.value()?;
    let n = a.len();
    let lhs = c.iter().flatten().copied().collect();
    let rhs = std::iter::repeat(0.0)
        .take(2 * n)
        .chain((0..n).map(|i| 12.0 * eps * a[i] + 4.0 * eps * eps * b[i]))
        .collect();
    Ok(Some(compare("affine quadruple (f,g,g,f)", lhs, rhs)))
}

/// Iterated Hamiltonians are the Taylor coefficients of `u` along the flow of one field.
pub fn single_field_sequence(f: &VectorGerm, u: &ScalarGerm, k: u32) -> Result<IdentityCheck, JetError> {
    let c = boxplus_sequence_vector(std::slice::from_ref(f), std::slice::from_ref(u), k)?;
    let lhs = c.orders.iter().map(|o| o[0]).collect();
    let rhs = (1..=k).map(|i| ham_power(f, u, i)).collect::<Result<_, _>>()?;
    Ok(compare(format!("single field sequence, K = {k}"), lhs, rhs))
}

/// Runs every applicable check on the given fields (up to four are used) and `u`.
pub fn run_suite(fields: &[VectorGerm], u: &ScalarGerm) -> Result<Vec<IdentityCheck>, JetError> {
    let fs = &fields[..fields.len().min(4)];
    let mut out = Vec::new();
    if fs.is_empty() {
        return Ok(out);
    }
    let id = identity_us(&u.base);
    for f in fs {
        out.push(single_field_sequence(f, u, 4)?);
        out.push(doubling(f, u, 3)?);
    }
    for k in 1..=4 {
        out.push(methods_agree(fs, u, k)?);
    }
    if fs.len() >= 2 {
        out.push(second_order_multi(fs, u)?);
    }
    for i in 0..fs.len() {
        for j in 0..fs.len() {
            if i == j {
                continue;
            }
            let (f, g) = (&fs[i], &fs[j]);
            let tag = |c: IdentityCheck| IdentityCheck { name: format!("{} [{}, {}]", c.name, i + 1, j + 1), ..c };
            out.push(tag(second_order_pair(f, g, u)?));
            out.push(tag(homogeneity(f, g, u, 2.0, 3)?));
            out.push(tag(sign_rule(f, g, u, 3)?));
            out.push(tag(bracket_quadruple(f, g)?));
            out.push(tag(bracket_quadruple_scalar(f, g, u)?));
            out.push(tag(bch_third(f, g)?));
            for k in 2..=4 {
                out.push(tag(linear_constraint(f, g, k)?));
            }
            for k in 1..=3 {
                if let Some(c) = ad_reduction(f, g, u, k)? {
                    out.push(tag(c));
                }
            }
            if let Some(c) = affine_quadruple(f, g, 0.5)? {
                out.push(tag(c));
            }
        }
    }
    if fs.len() >= 3 {
        out.push(bracket_ten(&fs[0], &fs[1], &fs[2])?);
    }
    // First coordinate function, a linear test function.
    if let Some(u1) = id.first() {
        out.push(methods_agree(fs, u1, 3)?);
    }
    Ok(out)
}
