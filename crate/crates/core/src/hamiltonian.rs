//! Hamiltonian operators `H_f u = f·∇u`, their ⊞-powers, Lie brackets and
//! the coefficients of balanced switched trajectories.
//!
//! Every value returned here is raw: the order-`k` entry is the full
//! operator value, not divided by `k!`. The group whose first field is used
//! first along the trajectory is the outermost operator in each composition.

use serde::{Deserialize, Serialize};

use crate::jet::{factorial, JetError, ScalarGerm, TruncatedPoly, VectorGerm};

/// Relative tolerance used to decide that a coefficient vanishes.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Raw,
    Factorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxplusMethod {
    Multinomial,
    Recursive,
}

/// Values of `(H_{f_1}⊞…⊞H_{f_m})^i u(x_0)` for `i = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamCoeffs {
    /// `orders[i-1]` is the order-`i` entry; scalar targets give length-1 vectors.
    pub orders: Vec<Vec<f64>>,
    pub normalization: Normalization,
    /// Largest absolute jet coefficient among the inputs.
    pub scale: f64,
}

impl HamCoeffs {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Entry of order `i` (1-based).
    pub fn order(&self, i: usize) -> &[f64] {
        &self.orders[i - 1]
    }

    pub fn normalized(&self) -> HamCoeffs {
        match self.normalization {
            Normalization::Factorial => self.clone(),
            Normalization::Raw => HamCoeffs {
                orders: self
                    .orders
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let f = factorial(i as u32 + 1);
                        v.iter().map(|x| x / f).collect()
                    })
                    .collect(),
                normalization: Normalization::Factorial,
                scale: self.scale,
            },
        }
    }

    /// Smallest order whose entry does not vanish.
    pub fn first_nonzero(&self) -> Option<usize> {
        (1..=self.len()).find(|&i| !vector_vanishes(self.order(i), self.scale))
    }
}

/// `|v| ≤ ZERO_TOL · max(1, scale)`
pub fn vanishes(v: f64, scale: f64) -> bool {
    v.abs() <= ZERO_TOL * scale.max(1.0)
}

pub fn vector_vanishes(v: &[f64], scale: f64) -> bool {
    v.iter().all(|x| vanishes(*x, scale))
}

/// Largest absolute jet coefficient over a set of fields and targets.
pub fn field_scale(fields: &[VectorGerm], us: &[ScalarGerm]) -> f64 {
    fields
        .iter()
        .map(VectorGerm::max_abs_coeff)
        .chain(us.iter().map(|u| u.poly.max_abs_coeff()))
        .fold(0.0, f64::max)
}

fn check_base(f: &VectorGerm, base: &[f64], n: usize) -> Result<(), JetError> {
    if f.dim() != n || f.comps.iter().any(|c| c.n_vars() != n) {
        return Err(JetError::DimensionMismatch(format!(
            "field of dimension {} acting on functions of {} variables",
            f.dim(),
            n
        )));
    }
    if f.base != base {
        return Err(JetError::DimensionMismatch("germs at different base points".into()));
    }
    Ok(())
}

/// `Σ_i f_i ∂_i u` on polynomials; requires `u.cap ≥ 1`.
fn lie_poly(f: &VectorGerm, u: &TruncatedPoly) -> Result<TruncatedPoly, JetError> {
    if u.cap() < 1 {
        return Err(JetError::InsufficientOrder(format!(
            "Lie derivative needs one more derivative than the available {}",
            u.cap().max(0)
        )));
    }
    let n = u.n_vars();
    let cap = f.cap().min(u.cap() - 1);
    let mut acc = TruncatedPoly::zero(n, cap);
    for (i, fi) in f.comps.iter().enumerate() {
        let d = u.partial(i);
        if d.is_zero() {
            continue;
        }
        acc = acc.add(&fi.mul(&d)?)?;
    }
    Ok(acc.truncate(cap))
}

/// Germ of `H_f u = f·∇u`.
pub fn lie_derivative(f: &VectorGerm, u: &ScalarGerm) -> Result<ScalarGerm, JetError> {
    check_base(f, &u.base, u.n_vars())?;
    Ok(ScalarGerm::new(u.base.clone(), lie_poly(f, &u.poly)?))
}

fn ham_power_poly(f: &VectorGerm, u: &TruncatedPoly, k: u32) -> Result<TruncatedPoly, JetError> {
    let mut w = u.clone();
    for _ in 0..k {
        w = lie_poly(f, &w)?;
    }
    Ok(w)
}

/// Germ of `H^{(k)}_f u`.
pub fn ham_power_germ(f: &VectorGerm, u: &ScalarGerm, k: u32) -> Result<ScalarGerm, JetError> {
    check_base(f, &u.base, u.n_vars())?;
    Ok(ScalarGerm::new(u.base.clone(), ham_power_poly(f, &u.poly, k)?))
}

/// `H^{(k)}_f u(x_0)`
pub fn ham_power(f: &VectorGerm, u: &ScalarGerm, k: u32) -> Result<f64, JetError> {
    ham_power_germ(f, u, k)?.value()
}

fn check_fields(fields: &[VectorGerm], u: &ScalarGerm) -> Result<(), JetError> {
    if fields.is_empty() {
        return Err(JetError::DimensionMismatch("empty field group".into()));
    }
    fields.iter().try_for_each(|f| check_base(f, &u.base, u.n_vars()))
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Visits every composition of `k` into `m` nonnegative parts.
fn compositions(k: u32, m: usize, visit: &mut dyn FnMut(&[u32])) {
    fn rec(rest: u32, slot: usize, buf: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
        if slot + 1 == buf.len() {
            buf[slot] = rest;
            visit(buf);
            return;
        }
        for i in 0..=rest {
            buf[slot] = i;
            rec(rest - i, slot + 1, buf, visit);
        }
    }
    let mut buf = vec![0; m];
    rec(k, 0, &mut buf, visit);
}

fn boxplus_multinomial(fields: &[VectorGerm], u: &TruncatedPoly, k: u32) -> Result<TruncatedPoly, JetError> {
    let mut acc: Option<TruncatedPoly> = None;
    let mut err = None;
    compositions(k, fields.len(), &mut |idx| {
        if err.is_some() {
            return;
        }
        let coef = factorial(k) / idx.iter().map(|&i| factorial(i)).product::<f64>();
        let term = fields
            .iter()
            .zip(idx)
            .rev()
            .try_fold(u.clone(), |w, (f, &i)| ham_power_poly(f, &w, i));
        match term {
            Ok(t) => {
                acc = Some(match acc.take() {
                    None => t.scale(coef),
                    Some(a) => match a.axpy(coef, &t) {
                        Ok(s) => s,
                        Err(e) => {
                            err = Some(e);
                            return;
                        }
                    },
                })
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(acc.expect("at least one composition")),
    }
}

/// `P_j^k w` with `P_j` the ⊞-sum of the first `j` fields.
fn boxplus_recursive(fields: &[VectorGerm], w: &TruncatedPoly, k: u32) -> Result<TruncatedPoly, JetError> {
    match fields.len() {
        0 => unreachable!("checked by caller"),
        1 => ham_power_poly(&fields[0], w, k),
        m => {
            let (head, last) = fields.split_at(m - 1);
            let mut acc: Option<TruncatedPoly> = None;
            let mut inner = w.clone();
            for i in 0..=k {
                if i > 0 {
                    inner = lie_poly(&last[0], &inner)?;
                }
                let term = boxplus_recursive(head, &inner, k - i)?;
                acc = Some(match acc {
                    None => term.scale(binomial(k, i)),
                    Some(a) => a.axpy(binomial(k, i), &term)?,
                });
            }
            Ok(acc.expect("k + 1 terms"))
        }
    }
}

/// Germ of `(H_{f_1}⊞…⊞H_{f_m})^k u`.
pub fn boxplus_germ(
    fields: &[VectorGerm],
    u: &ScalarGerm,
    k: u32,
    method: BoxplusMethod,
) -> Result<ScalarGerm, JetError> {
    check_fields(fields, u)?;
    let poly = match method {
        BoxplusMethod::Multinomial => boxplus_multinomial(fields, &u.poly, k)?,
        BoxplusMethod::Recursive => boxplus_recursive(fields, &u.poly, k)?,
    };
    Ok(ScalarGerm::new(u.base.clone(), poly))
}

/// `(H_{f_1}⊞…⊞H_{f_m})^k u(x_0)`
pub fn boxplus_power(
    fields: &[VectorGerm],
    u: &ScalarGerm,
    k: u32,
    method: BoxplusMethod,
) -> Result<f64, JetError> {
    boxplus_germ(fields, u, k, method)?.value()
}

/// Orders `1..=K` of the ⊞-sum as the Taylor coefficients in `t` of
/// `e^{tH_{f_1}} ⋯ e^{tH_{f_m}} u`, times `i!`.
fn boxplus_series(fields: &[VectorGerm], u: &TruncatedPoly, big_k: u32) -> Result<Vec<f64>, JetError> {
    let kk = big_k as usize;
    let mut w: Vec<Option<TruncatedPoly>> = vec![None; kk + 1];
    w[0] = Some(u.clone());
    for f in fields.iter().rev() {
        let mut next: Vec<Option<TruncatedPoly>> = vec![None; kk + 1];
        for q in 0..=kk {
            let Some(start) = &w[q] else { continue };
            let mut cur = start.clone();
            for i in 0..=(kk - q) {
                let term = cur.scale(1.0 / factorial(i as u32));
                next[q + i] = Some(match next[q + i].take() {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
                if q + i < kk {
                    cur = lie_poly(f, &cur)?;
                }
            }
        }
        w = next;
    }
    (1..=kk)
        .map(|i| match &w[i] {
            Some(p) => Ok(p.value()? * factorial(i as u32)),
            None => Ok(0.0),
        })
        .collect()
}

/// All orders `1..=K` for a scalar target in one pass.
pub fn boxplus_sequence(fields: &[VectorGerm], u: &ScalarGerm, big_k: u32) -> Result<HamCoeffs, JetError> {
    boxplus_sequence_vector(fields, std::slice::from_ref(u), big_k)
}

/// All orders `1..=K` for a vector target `u = (u_1..u_h)`.
pub fn boxplus_sequence_vector(
    fields: &[VectorGerm],
    us: &[ScalarGerm],
    big_k: u32,
) -> Result<HamCoeffs, JetError> {
    let mut orders = vec![Vec::with_capacity(us.len()); big_k as usize];
    for u in us {
        check_fields(fields, u)?;
        let vals = boxplus_series(fields, &u.poly, big_k)?;
        for (slot, v) in orders.iter_mut().zip(vals) {
            slot.push(v);
        }
    }
    Ok(HamCoeffs { orders, normalization: Normalization::Raw, scale: field_scale(fields, us) })
}

/// Componentwise `(H_{f_1}⊞…⊞H_{f_m})^k u(x_0)` for `u = (u_1..u_h)`.
pub fn boxplus_vector(fields: &[VectorGerm], us: &[ScalarGerm], k: u32) -> Result<Vec<f64>, JetError> {
    us.iter()
        .map(|u| boxplus_power(fields, u, k, BoxplusMethod::Multinomial))
        .collect()
}

/// Coefficients of the balanced trajectory: the ⊞-powers applied to the identity map.
pub fn trajectory_coeffs(fields: &[VectorGerm], k: u32) -> Result<Vec<Vec<f64>>, JetError> {
    let first = fields
        .first()
        .ok_or_else(|| JetError::DimensionMismatch("empty field group".into()))?;
    let id = VectorGerm::identity(&first.base, k as i32);
    let us: Vec<ScalarGerm> = id
        .comps
        .into_iter()
        .map(|p| ScalarGerm::new(first.base.clone(), p))
        .collect();
    Ok(boxplus_sequence_vector(fields, &us, k)?.orders)
}

/// Derivative of the field `g` in the direction `f`, i.e. `Dg·f`.
pub fn directional(g: &VectorGerm, f: &VectorGerm) -> Result<VectorGerm, JetError> {
    let comps = g.comps.iter().map(|gi| lie_poly(f, gi)).collect::<Result<_, _>>()?;
    Ok(VectorGerm::new(g.base.clone(), comps))
}

/// `[f,g] = Dg·f − Df·g`
pub fn lie_bracket(f: &VectorGerm, g: &VectorGerm) -> Result<VectorGerm, JetError> {
    if f.dim() != g.dim() || f.base != g.base {
        return Err(JetError::DimensionMismatch("bracket of incompatible fields".into()));
    }
    if f.cap().min(g.cap()) < 1 {
        return Err(JetError::InsufficientOrder("Lie bracket needs first derivatives".into()));
    }
    directional(g, f)?.sub(&directional(f, g)?)
}

/// `ad^k_g f`, with `ad^0_g f = f` and `ad^{k+1}_g f = [g, ad^k_g f]`.
pub fn ad_power(g: &VectorGerm, f: &VectorGerm, k: u32) -> Result<VectorGerm, JetError> {
    let mut acc = f.clone();
    for _ in 0..k {
        acc = lie_bracket(g, &acc)?;
    }
    Ok(acc)
}

/// The field `F_k` of the linear-constraint recursion:
/// `F_1 = f + g`, `F_2 = D(f+g)(f+g) + [f,g]`, `F_{k+1} = DF_k(f+g) + [F_k, g]`.
pub fn linear_constraint_field(f: &VectorGerm, g: &VectorGerm, k: u32) -> Result<VectorGerm, JetError> {
    let s = f.add(g)?;
    match k {
        0 => Err(JetError::InsufficientOrder("recursion starts at order 1".into())),
        1 => Ok(s),
        _ => {
            let mut fk = directional(&s, &s)?.add(&lie_bracket(f, g)?)?;
            for _ in 2..k {
                fk = directional(&fk, &s)?.add(&lie_bracket(&fk, g)?)?;
            }
            Ok(fk)
        }
    }
}
