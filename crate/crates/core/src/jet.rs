//! Truncated multivariate Taylor polynomials (jets) at a base point.
//!
//! A [`TruncatedPoly`] in the local coordinates `ξ = x - x0` stores the
//! coefficients `∂^α f(x0) / α!` for `|α| ≤ cap`. The cap is the number of
//! derivatives still trustworthy: differentiating lowers it by one, products
//! and sums take the smaller cap of their operands. A germ whose cap has gone
//! negative carries no information and refuses to report a value.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{Expr, ExprError, Func};

/// Largest supported number of variables.
pub const MAX_VARS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("insufficient jet order: {0}")]
    InsufficientOrder(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Domain(#[from] ExprError),
}

/// Exponent multi-index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono([u8; MAX_VARS]);

impl Mono {
    pub const ZERO: Mono = Mono([0; MAX_VARS]);

    pub fn from_slice(alpha: &[u32]) -> Mono {
        let mut m = [0u8; MAX_VARS];
        for (slot, &a) in m.iter_mut().zip(alpha) {
            *slot = a as u8;
        }
        Mono(m)
    }

    pub fn unit(i: usize) -> Mono {
        let mut m = [0u8; MAX_VARS];
        m[i] = 1;
        Mono(m)
    }

    pub fn degree(&self) -> i32 {
        self.0.iter().map(|&a| a as i32).sum()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i] as u32
    }

    pub fn to_vec(&self, n: usize) -> Vec<u32> {
        self.0[..n].iter().map(|&a| a as u32).collect()
    }

    fn plus(&self, other: &Mono) -> Mono {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
        Mono(m)
    }

    /// `α!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a as u32)).product()
    }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Sparse truncated polynomial in `n_vars` local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPoly {
    n_vars: usize,
    cap: i32,
    coeffs: BTreeMap<Mono, f64>,
}

impl TruncatedPoly {
    pub fn zero(n_vars: usize, cap: i32) -> Self {
        assert!(n_vars <= MAX_VARS, "at most {MAX_VARS} variables are supported");
        TruncatedPoly { n_vars, cap, coeffs: BTreeMap::new() }
    }

    pub fn constant(n_vars: usize, cap: i32, c: f64) -> Self {
        let mut p = Self::zero(n_vars, cap);
        p.insert(Mono::ZERO, c);
        p
    }

    /// The local coordinate `ξ_i`.
    pub fn coordinate(n_vars: usize, cap: i32, i: usize) -> Self {
        let mut p = Self::zero(n_vars, cap);
        p.insert(Mono::unit(i), 1.0);
        p
    }

    /// Builds a polynomial from `(α, coefficient)` pairs, dropping terms above the cap.
    pub fn from_terms(n_vars: usize, cap: i32, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Self {
        let mut p = Self::zero(n_vars, cap);
        for (alpha, c) in terms {
            let m = Mono::from_slice(&alpha);
            let prev = p.coeffs.get(&m).copied().unwrap_or(0.0);
            p.insert(m, prev + c);
        }
        p
    }

    fn insert(&mut self, m: Mono, c: f64) {
        if m.degree() > self.cap || c == 0.0 {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, c);
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Degree cap; negative once every coefficient has been used up.
    pub fn cap(&self) -> i32 {
        self.cap
    }

    pub fn coeff(&self, alpha: &[u32]) -> f64 {
        self.coeffs.get(&Mono::from_slice(alpha)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &f64)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// The constant coefficient.
    pub fn value(&self) -> Result<f64, JetError> {
        if self.cap < 0 {
            return Err(JetError::InsufficientOrder(
                "germ has no valid coefficients left".into(),
            ));
        }
        Ok(self.coeffs.get(&Mono::ZERO).copied().unwrap_or(0.0))
    }

    fn check(&self, other: &Self) -> Result<(), JetError> {
        if self.n_vars != other.n_vars {
            return Err(JetError::DimensionMismatch(format!(
                "{} vs {} variables",
                self.n_vars, other.n_vars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, JetError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, JetError> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self, JetError> {
        self.check(other)?;
        let cap = self.cap.min(other.cap);
        let mut out = TruncatedPoly::zero(self.n_vars, cap);
        for (m, c) in &self.coeffs {
            if m.degree() <= cap {
                out.coeffs.insert(*m, *c);
            }
        }
        for (m, c) in &other.coeffs {
            if m.degree() <= cap {
                let prev = out.coeffs.get(m).copied().unwrap_or(0.0);
                out.insert(*m, prev + a * c);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = TruncatedPoly::zero(self.n_vars, self.cap);
        if a != 0.0 {
            for (m, c) in &self.coeffs {
                out.coeffs.insert(*m, a * c);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, JetError> {
        self.check(other)?;
        let cap = self.cap.min(other.cap);
        let mut acc: BTreeMap<Mono, f64> = BTreeMap::new();
        let lhs: Vec<(Mono, i32, f64)> = self
            .coeffs
            .iter()
            .filter(|(m, _)| m.degree() <= cap)
            .map(|(m, c)| (*m, m.degree(), *c))
            .collect();
        let rhs: Vec<(Mono, i32, f64)> = other
            .coeffs
            .iter()
            .filter(|(m, _)| m.degree() <= cap)
            .map(|(m, c)| (*m, m.degree(), *c))
            .collect();
        for (ma, da, ca) in &lhs {
            for (mb, db, cb) in &rhs {
                if da + db <= cap {
                    *acc.entry(ma.plus(mb)).or_insert(0.0) += ca * cb;
                }
            }
        }
        acc.retain(|_, c| *c != 0.0);
        Ok(TruncatedPoly { n_vars: self.n_vars, cap, coeffs: acc })
    }

    /// Formal partial derivative in variable `i`; the cap drops by one.
    pub fn partial(&self, i: usize) -> Self {
        let cap = self.cap - 1;
        let mut out = TruncatedPoly::zero(self.n_vars, cap);
        for (m, c) in &self.coeffs {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut d = *m;
            d.0[i] -= 1;
            if d.degree() <= cap {
                out.coeffs.insert(d, c * e as f64);
            }
        }
        out
    }

    /// Same polynomial with a lower cap.
    pub fn truncate(&self, cap: i32) -> Self {
        let cap = cap.min(self.cap);
        let mut out = TruncatedPoly::zero(self.n_vars, cap);
        for (m, c) in &self.coeffs {
            if m.degree() <= cap {
                out.coeffs.insert(*m, *c);
            }
        }
        out
    }

    /// Evaluates the polynomial at local offset `xi`.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(m, c)| {
                c * (0..self.n_vars).map(|i| xi[i].powi(m.0[i] as i32)).product::<f64>()
            })
            .sum()
    }

    fn without_constant(&self) -> (f64, Self) {
        let mut h = self.clone();
        let c0 = h.coeffs.remove(&Mono::ZERO).unwrap_or(0.0);
        (c0, h)
    }

    /// `Σ_j series[j] * h^j` where `self = c0 + h`; `series` holds the
    /// normalised derivatives `φ^(j)(c0)/j!` of a univariate function.
    fn compose_series(&self, series: &[f64]) -> Result<Self, JetError> {
        let (_, h) = self.without_constant();
        let cap = self.cap.max(0);
        let mut out = TruncatedPoly::constant(self.n_vars, cap, series[0]);
        out.cap = self.cap;
        let mut power = TruncatedPoly::constant(self.n_vars, self.cap, 1.0);
        for coeff in series.iter().skip(1) {
            power = power.mul(&h)?;
            if power.is_zero() {
                break;
            }
            out = out.axpy(*coeff, &power)?;
        }
        Ok(out)
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let (a, _) = self.without_constant();
        if a == 0.0 {
            return Err(ExprError::Domain("division by zero".into()).into());
        }
        // d^j/dy^j (1/y) / j! = (-1)^j / a^{j+1}
        let series: Vec<f64> = (0..=self.cap.max(0))
            .map(|j| (-1f64).powi(j) / a.powi(j + 1))
            .collect();
        self.compose_series(&series)
    }

    pub fn powi(&self, n: i32) -> Result<Self, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = TruncatedPoly::constant(self.n_vars, self.cap, 1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    pub fn apply(&self, func: Func) -> Result<Self, JetError> {
        let (a, _) = self.without_constant();
        let len = self.cap.max(0) as usize + 1;
        let series: Vec<f64> = match func {
            Func::Sin => (0..len)
                .map(|j| (a + j as f64 * std::f64::consts::FRAC_PI_2).sin() / factorial(j as u32))
                .collect(),
            Func::Cos => (0..len)
                .map(|j| (a + j as f64 * std::f64::consts::FRAC_PI_2).cos() / factorial(j as u32))
                .collect(),
            Func::Exp => (0..len).map(|j| a.exp() / factorial(j as u32)).collect(),
            Func::Ln => {
                let ln_a = func.apply(a)?;
                // ln^(j)(a)/j! = (-1)^{j-1} / (j a^j)
                (0..len)
                    .map(|j| if j == 0 { ln_a } else { (-1f64).powi(j as i32 - 1) / (j as f64 * a.powi(j as i32)) })
                    .collect()
            }
            Func::Sqrt => {
                let root = func.apply(a)?;
                if a == 0.0 && len > 1 {
                    return Err(ExprError::Domain("sqrt is not differentiable at 0".into()).into());
                }
                // binomial series of (a + h)^{1/2}
                let mut coeff = root;
                let mut out = Vec::with_capacity(len);
                for j in 0..len {
                    out.push(coeff);
                    coeff *= (0.5 - j as f64) / ((j + 1) as f64 * a);
                }
                out
            }
        };
        self.compose_series(&series)
    }
}

/// Jet of a scalar function at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGerm {
    pub base: Vec<f64>,
    pub poly: TruncatedPoly,
}

impl ScalarGerm {
    pub fn new(base: Vec<f64>, poly: TruncatedPoly) -> Self {
        debug_assert_eq!(base.len(), poly.n_vars());
        ScalarGerm { base, poly }
    }

    pub fn value(&self) -> Result<f64, JetError> {
        self.poly.value()
    }

    pub fn cap(&self) -> i32 {
        self.poly.cap()
    }

    pub fn n_vars(&self) -> usize {
        self.base.len()
    }

    /// Germ of the `i`-th coordinate function `x ↦ x_i`.
    pub fn coordinate(base: &[f64], cap: i32, i: usize) -> Self {
        let n = base.len();
        let poly = TruncatedPoly::constant(n, cap, base[i])
            .add(&TruncatedPoly::coordinate(n, cap, i))
            .expect("same dimension");
        ScalarGerm { base: base.to_vec(), poly }
    }
}

/// Jet of a vector field: one polynomial per component, shared base point.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGerm {
    pub base: Vec<f64>,
    pub comps: Vec<TruncatedPoly>,
}

impl VectorGerm {
    pub fn new(base: Vec<f64>, comps: Vec<TruncatedPoly>) -> Self {
        VectorGerm { base, comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn cap(&self) -> i32 {
        self.comps.iter().map(TruncatedPoly::cap).min().unwrap_or(i32::MAX)
    }

    pub fn value(&self) -> Result<Vec<f64>, JetError> {
        self.comps.iter().map(TruncatedPoly::value).collect()
    }

    pub fn scale(&self, a: f64) -> Self {
        VectorGerm { base: self.base.clone(), comps: self.comps.iter().map(|c| c.scale(a)).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self, JetError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, JetError> {
        self.axpy(-1.0, other)
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self, JetError> {
        if self.dim() != other.dim() {
            return Err(JetError::DimensionMismatch(format!(
                "vector germs of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(p, q)| p.axpy(a, q))
            .collect::<Result<_, _>>()?;
        Ok(VectorGerm { base: self.base.clone(), comps })
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps.iter().map(TruncatedPoly::max_abs_coeff).fold(0.0, f64::max)
    }

    /// Germ of the identity map `x ↦ x`.
    pub fn identity(base: &[f64], cap: i32) -> Self {
        let comps = (0..base.len())
            .map(|i| ScalarGerm::coordinate(base, cap, i).poly)
            .collect();
        VectorGerm { base: base.to_vec(), comps }
    }
}

fn lift_poly(e: &Expr, x0: &[f64], cap: i32) -> Result<TruncatedPoly, JetError> {
    let n = x0.len();
    Ok(match e {
        Expr::Var(i) => {
            if *i >= n {
                return Err(JetError::DimensionMismatch(format!(
                    "variable index {i} at a point of dimension {n}"
                )));
            }
            TruncatedPoly::constant(n, cap, x0[*i]).add(&TruncatedPoly::coordinate(n, cap, *i))?
        }
        Expr::Const(c) => TruncatedPoly::constant(n, cap, *c),
        Expr::Neg(a) => lift_poly(a, x0, cap)?.scale(-1.0),
        Expr::Add(a, b) => lift_poly(a, x0, cap)?.add(&lift_poly(b, x0, cap)?)?,
        Expr::Sub(a, b) => lift_poly(a, x0, cap)?.sub(&lift_poly(b, x0, cap)?)?,
        Expr::Mul(a, b) => lift_poly(a, x0, cap)?.mul(&lift_poly(b, x0, cap)?)?,
        Expr::Div(a, b) => lift_poly(a, x0, cap)?.mul(&lift_poly(b, x0, cap)?.recip()?)?,
        Expr::Pow(a, k) => {
            let base = lift_poly(a, x0, cap)?;
            if *k < 0 && base.value()? == 0.0 {
                return Err(ExprError::Domain("zero raised to a negative power".into()).into());
            }
            base.powi(*k)?
        }
        Expr::Func(f, a) => lift_poly(a, x0, cap)?.apply(*f)?,
    })
}

/// Jet of `e` at `x0` with degree cap `cap`.
pub fn lift(e: &Expr, x0: &[f64], cap: i32) -> Result<ScalarGerm, JetError> {
    Ok(ScalarGerm { base: x0.to_vec(), poly: lift_poly(e, x0, cap)? })
}

/// Jet of a vector of expressions at `x0`.
pub fn lift_vector(es: &[Expr], x0: &[f64], cap: i32) -> Result<VectorGerm, JetError> {
    let comps = es.iter().map(|e| lift_poly(e, x0, cap)).collect::<Result<_, _>>()?;
    Ok(VectorGerm { base: x0.to_vec(), comps })
}
