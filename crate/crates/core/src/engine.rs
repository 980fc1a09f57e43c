//! Attainability certificates assembled from point data at `x_o`.
//!
//! Targets use absolute descriptions:
//! * fat: `{u ≤ 0}` with `u(x_o) = 0`;
//! * point: `{x_o}`, i.e. `u(x) = x − x_o`;
//! * manifold: `{u_1 = … = u_h = 0}`, optionally intersected with `{u_{h+1} ≥ 0}`.
//!
//! For a manifold with an inequality, `x_o` lies on the boundary when
//! `u_{h+1}(x_o) = 0` and in the relative interior when `u_{h+1}(x_o) > 0`;
//! only boundary points add `u_{h+1}` to the group checks.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_with_params, Expr, ExprError};
use crate::hamiltonian::{boxplus_sequence_vector, ZERO_TOL};
use crate::jet::{factorial, lift, lift_vector, JetError, ScalarGerm, VectorGerm};
use crate::petrov::PetrovError;
use crate::sampling::halton_ball;
use crate::span::{check_boundary, eccentricity, is_positive_basis, rank, SpanCertificate, SpanError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error(transparent)]
    Petrov(#[from] PetrovError),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("order claim failed at order {order}: value {value:e}")]
    OrderClaimFailed { order: u32, value: f64 },
    #[error("gradient of the target function vanishes at x_o")]
    GradientVanishes,
    #[error("no group qualifies: {0}")]
    NoGroupQualifies(String),
    #[error("columns are not a positive basis: {0}")]
    NotPositiveBasis(String),
    #[error("Jacobian of the target functions is rank deficient: {0}")]
    RankDeficientJacobian(String),
    #[error("side condition failed: {0}")]
    SideConditionFailed(String),
    #[error("point is not in the target: {0}")]
    NotInTarget(String),
}

/// An available vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldDef {
    pub name: String,
    pub components: Vec<Expr>,
}

impl VectorFieldDef {
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.components.iter().map(|c| c.eval_point(x)).collect()
    }

    pub fn scaled(&self, name: &str, c: f64) -> VectorFieldDef {
        VectorFieldDef {
            name: name.to_string(),
            components: self.components.iter().map(|e| Expr::mul(Expr::constant(c), e.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    General,
    /// `−f` is available whenever `f` is.
    Symmetric,
    /// Recorded only; the palette is used as declared.
    Convex,
    /// `F = f_0 + Σ a_i f_i` with `a ∈ [−1,1]^p`; the palette holds every
    /// combination with coefficients in `{−1, 0, 1}`.
    Affine { drift: String, controls: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    pub variables: Vec<String>,
    pub fields: Vec<VectorFieldDef>,
    pub structure: Structure,
    /// Locality radius `R`.
    pub radius: f64,
    palette: Vec<VectorFieldDef>,
}

impl ControlSystem {
    pub fn new(
        variables: Vec<String>,
        fields: Vec<VectorFieldDef>,
        structure: Structure,
        radius: f64,
    ) -> Result<Self, EngineError> {
        let n = variables.len();
        for f in &fields {
            if f.components.len() != n {
                return Err(EngineError::DimensionMismatch(format!(
                    "field `{}` has {} components for {n} variables",
                    f.name,
                    f.components.len()
                )));
            }
        }
        let palette = expand_palette(&fields, &structure)?;
        Ok(ControlSystem { variables, fields, structure, radius, palette })
    }

    /// Parses fields given as component strings; `params` are named constants.
    pub fn parse(
        variables: &[&str],
        fields: &[(&str, &[&str])],
        params: &BTreeMap<String, f64>,
        structure: Structure,
        radius: f64,
    ) -> Result<Self, EngineError> {
        let vars: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let defs = fields
            .iter()
            .map(|(name, comps)| {
                Ok(VectorFieldDef {
                    name: name.to_string(),
                    components: comps
                        .iter()
                        .map(|c| parse_with_params(c, &vars, params))
                        .collect::<Result<_, ExprError>>()?,
                })
            })
            .collect::<Result<Vec<_>, EngineError>>()?;
        ControlSystem::new(vars, defs, structure, radius)
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    /// Available fields after applying the structure's expansion rules.
    pub fn palette(&self) -> &[VectorFieldDef] {
        &self.palette
    }

    pub fn field(&self, name: &str) -> Result<&VectorFieldDef, EngineError> {
        self.palette
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| EngineError::UnknownField(name.to_string()))
    }

    pub fn parse_expr(&self, text: &str, params: &BTreeMap<String, f64>) -> Result<Expr, EngineError> {
        Ok(parse_with_params(text, &self.variables, params)?)
    }

    fn lift_fields(&self, names: &[String], x_o: &[f64], cap: i32) -> Result<Vec<VectorGerm>, EngineError> {
        names
            .iter()
            .map(|n| Ok(lift_vector(&self.field(n)?.components, x_o, cap)?))
            .collect()
    }
}

fn expand_palette(fields: &[VectorFieldDef], structure: &Structure) -> Result<Vec<VectorFieldDef>, EngineError> {
    let find = |name: &str| {
        fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| EngineError::UnknownField(name.to_string()))
    };
    match structure {
        Structure::General | Structure::Convex => Ok(fields.to_vec()),
        Structure::Symmetric => {
            let mut out = fields.to_vec();
            out.extend(fields.iter().map(|f| f.scaled(&format!("-{}", f.name), -1.0)));
            Ok(out)
        }
        Structure::Affine { drift, controls } => {
            let f0 = find(drift)?;
            let cs: Vec<&VectorFieldDef> = controls.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
            let p = cs.len();
            let mut combos: Vec<Vec<i8>> = Vec::new();
            for code in 0..3usize.pow(p as u32) {
                let mut c = Vec::with_capacity(p);
                let mut r = code;
                for _ in 0..p {
                    c.push(match r % 3 {
                        0 => 0,
                        1 => 1,
                        _ => -1,
                    });
                    r /= 3;
                }
                combos.push(c);
            }
            combos.sort_by_key(|c| {
                let rank: Vec<u8> = c.iter().map(|&v| match v { 0 => 0, 1 => 1, _ => 2 }).collect();
                (c.iter().filter(|&&v| v != 0).count(), rank)
            });
            Ok(combos
                .into_iter()
                .map(|c| {
                    let mut name = f0.name.clone();
                    let mut comps = f0.components.clone();
                    for (coef, ctrl) in c.iter().zip(&cs) {
                        if *coef == 0 {
                            continue;
                        }
                        name.push(if *coef > 0 { '+' } else { '-' });
                        name.push_str(&ctrl.name);
                        comps = comps
                            .into_iter()
                            .zip(&ctrl.components)
                            .map(|(a, b)| if *coef > 0 { Expr::add(a, b.clone()) } else { Expr::sub(a, b.clone()) })
                            .collect();
                    }
                    VectorFieldDef { name, components: comps }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Fat,
    Point,
    Manifold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDef {
    pub kind: TargetKind,
    pub equations: Vec<Expr>,
    pub inequality: Option<Expr>,
}

impl TargetDef {
    /// `{u ≤ 0}`
    pub fn fat(u: Expr) -> Self {
        TargetDef { kind: TargetKind::Fat, equations: Vec::new(), inequality: Some(u) }
    }

    /// The point itself; functions are built from `x_o` on use.
    pub fn point() -> Self {
        TargetDef { kind: TargetKind::Point, equations: Vec::new(), inequality: None }
    }

    /// `{u = 0}` or `{u = 0, u_{h+1} ≥ 0}`.
    pub fn manifold(equations: Vec<Expr>, inequality: Option<Expr>) -> Self {
        TargetDef { kind: TargetKind::Manifold, equations, inequality }
    }

    /// Scalar functions whose coefficients form the columns at `x_o`, and
    /// whether `x_o` is a boundary point.
    pub fn functions_at(&self, x_o: &[f64], tol: f64) -> Result<(Vec<Expr>, bool), EngineError> {
        match self.kind {
            TargetKind::Fat => {
                let u = self.inequality.clone().ok_or_else(|| EngineError::NotInTarget("fat target without u".into()))?;
                Ok((vec![u], true))
            }
            TargetKind::Point => Ok((point_functions(x_o), false)),
            TargetKind::Manifold => {
                let mut us = self.equations.clone();
                let boundary = match &self.inequality {
                    None => false,
                    Some(g) => {
                        let v = g.eval_point(x_o)?;
                        if v < -tol {
                            return Err(EngineError::NotInTarget(format!("u_(h+1)(x_o) = {v:e} < 0")));
                        }
                        v.abs() <= tol
                    }
                };
                if boundary {
                    us.push(self.inequality.clone().expect("checked"));
                }
                Ok((us, boundary))
            }
        }
    }
}

/// `u_i(x) = x_i − x_o_i`
pub fn point_functions(x_o: &[f64]) -> Vec<Expr> {
    x_o.iter()
        .enumerate()
        .map(|(i, &c)| Expr::sub(Expr::var(i), Expr::constant(c)))
        .collect()
}

fn identity_functions(n: usize) -> Vec<Expr> {
    (0..n).map(Expr::var).collect()
}

/// Ordered field names and the claimed order `k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupSpec {
    pub fields: Vec<String>,
    pub order: u32,
}

impl GroupSpec {
    pub fn new<S: Into<String>>(fields: impl IntoIterator<Item = S>, order: u32) -> Result<Self, EngineError> {
        let g = GroupSpec { fields: fields.into_iter().map(Into::into).collect(), order };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.fields.is_empty() {
            return Err(EngineError::InvalidGroup("empty field list".into()));
        }
        if self.order == 0 {
            return Err(EngineError::InvalidGroup("order must be positive".into()));
        }
        if self.order == 1 && self.fields.len() > 1 {
            return Err(EngineError::InvalidGroup("first-order groups use a single field".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("({})^{}", self.fields.join(", "), self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Relative tolerance for vanishing coefficients.
    pub tol: f64,
    /// Absolute tolerance for target membership of `x_o`.
    pub target_tol: f64,
    pub seed: u64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { tol: ZERO_TOL, target_tol: 1e-9, seed: 0 }
    }
}

fn vanishes(v: f64, scale: f64, tol: f64) -> bool {
    v.abs() <= tol * scale.max(1.0)
}

/// Coefficients of a group that passed its order claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedGroup {
    pub group: GroupSpec,
    /// Raw values for orders `1..=k`, one entry per target function.
    pub raw: Vec<Vec<f64>>,
    /// Order-`k` entry divided by `k!`.
    pub column: Vec<f64>,
    pub scale: f64,
    /// Largest `|value| / threshold` over the claimed-vanishing entries.
    pub vanishing_margin: f64,
}

/// Raw coefficients of a group on the given functions through order `k`.
pub fn group_coefficients(
    system: &ControlSystem,
    us: &[Expr],
    x_o: &[f64],
    fields: &[String],
    k: u32,
) -> Result<(Vec<Vec<f64>>, f64), EngineError> {
    let germs = system.lift_fields(fields, x_o, k as i32 - 1)?;
    let ug: Vec<ScalarGerm> = us.iter().map(|u| lift(u, x_o, k as i32)).collect::<Result<_, _>>()?;
    let c = boxplus_sequence_vector(&germs, &ug, k)?;
    Ok((c.orders, c.scale))
}

/// Verifies that orders `1..k` vanish and order `k` does not.
pub fn check_group(
    system: &ControlSystem,
    us: &[Expr],
    x_o: &[f64],
    group: &GroupSpec,
    tol: f64,
) -> Result<CheckedGroup, EngineError> {
    group.validate()?;
    let k = group.order;
    let (raw, scale) = group_coefficients(system, us, x_o, &group.fields, k)?;
    let threshold = tol * scale.max(1.0);
    let mut margin: f64 = 0.0;
    for r in 1..k {
        let v = &raw[r as usize - 1];
        let worst = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        margin = margin.max(worst / threshold);
        if worst > threshold {
            return Err(EngineError::OrderClaimFailed { order: r, value: signed_worst(v) });
        }
    }
    let top = &raw[k as usize - 1];
    if top.iter().all(|x| vanishes(*x, scale, tol)) {
        return Err(EngineError::OrderClaimFailed { order: k, value: signed_worst(top) });
    }
    let column = top.iter().map(|v| v / factorial(k)).collect();
    Ok(CheckedGroup { group: group.clone(), raw, column, scale, vanishing_margin: margin })
}

fn signed_worst(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremTag {
    Fat,
    FatMulti,
    FatComparison,
    Point,
    Manifold,
    ManifoldBoundary,
    CorollaryRestricted,
    CorollaryBlock,
}

/// One side condition of a theorem variant and how it was established.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCondition {
    pub name: String,
    pub verified: bool,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBounds {
    pub radius: f64,
    pub lipschitz: f64,
    pub sup_norm: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tolerance: f64,
    pub worst_vanishing_margin: f64,
    pub min_column_norm: f64,
    pub eccentricity: Option<f64>,
    pub bounds: Option<SystemBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedGroup {
    pub group: GroupSpec,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlaCertificate {
    pub theorem: TheoremTag,
    pub x_o: Vec<f64>,
    pub boundary: bool,
    pub groups: Vec<CheckedGroup>,
    pub rejected: Vec<RejectedGroup>,
    /// Columns `A^o_i` (normalised by `1/k_i!`).
    pub a_o: Vec<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub span: Option<SpanCertificate>,
    pub k_bar: u32,
    /// Hölder exponent `1/k̄` of the time estimate.
    pub exponent: f64,
    pub side_conditions: Vec<SideCondition>,
    pub diagnostics: Diagnostics,
}

impl StlaCertificate {
    pub fn group_specs(&self) -> Vec<GroupSpec> {
        self.groups.iter().map(|g| g.group.clone()).collect()
    }
}

fn gradient(u: &Expr, x_o: &[f64]) -> Result<Vec<f64>, ExprError> {
    (0..x_o.len()).map(|i| u.symbolic_partial(i).eval_point(x_o)).collect()
}

fn jacobian(us: &[Expr], x_o: &[f64]) -> Result<DMatrix<f64>, ExprError> {
    let rows: Vec<Vec<f64>> = us.iter().map(|u| gradient(u, x_o)).collect::<Result<_, _>>()?;
    Ok(DMatrix::from_fn(us.len(), x_o.len(), |i, j| rows[i][j]))
}

fn diagnostics(groups: &[CheckedGroup], tol: f64) -> Diagnostics {
    Diagnostics {
        tolerance: tol,
        worst_vanishing_margin: groups.iter().map(|g| g.vanishing_margin).fold(0.0, f64::max),
        min_column_norm: groups
            .iter()
            .map(|g| g.column.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min),
        eccentricity: None,
        bounds: None,
    }
}

fn check_membership(u: &Expr, x_o: &[f64], opts: &EngineOptions) -> Result<(), EngineError> {
    let v = u.eval_point(x_o)?;
    if v.abs() > opts.target_tol {
        return Err(EngineError::NotInTarget(format!("u(x_o) = {v:e} is not zero")));
    }
    Ok(())
}

fn check_gradient(u: &Expr, x_o: &[f64], opts: &EngineOptions) -> Result<(), EngineError> {
    let g = gradient(u, x_o)?;
    if g.iter().all(|v| v.abs() <= opts.tol) {
        return Err(EngineError::GradientVanishes);
    }
    Ok(())
}

/// Checks every group on a scalar `u` and keeps those with a negative top coefficient.
fn decreasing_groups(
    system: &ControlSystem,
    u: &Expr,
    x_o: &[f64],
    groups: &[GroupSpec],
    opts: &EngineOptions,
) -> (Vec<CheckedGroup>, Vec<RejectedGroup>) {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for g in groups {
        match check_group(system, std::slice::from_ref(u), x_o, g, opts.tol) {
            Ok(c) if c.column[0] < 0.0 => ok.push(c),
            Ok(c) => rejected.push(RejectedGroup {
                group: g.clone(),
                reason: format!("order-{} coefficient {:e} is not negative", g.order, c.raw[g.order as usize - 1][0]),
            }),
            Err(e) => rejected.push(RejectedGroup { group: g.clone(), reason: e.to_string() }),
        }
    }
    (ok, rejected)
}

/// Fat target `{u ≤ 0}`: some group has a decrease rate of order `k` at `x_o`.
pub fn certify_fat(
    system: &ControlSystem,
    u: &Expr,
    x_o: &[f64],
    groups: &[GroupSpec],
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    check_membership(u, x_o, opts)?;
    check_gradient(u, x_o, opts)?;
    let (mut ok, rejected) = decreasing_groups(system, u, x_o, groups, opts);
    if ok.is_empty() {
        return Err(EngineError::NoGroupQualifies(summarise(&rejected)));
    }
    // Lowest order gives the best estimate; ties keep the given order.
    let best = ok.iter().map(|g| g.group.order).min().expect("nonempty");
    let pos = ok.iter().position(|g| g.group.order == best).expect("present");
    let chosen = ok.remove(pos);
    let mut diag = diagnostics(std::slice::from_ref(&chosen), opts.tol);
    diag.bounds = estimate_bounds(system, x_o, opts.seed).ok();
    Ok(StlaCertificate {
        theorem: TheoremTag::Fat,
        x_o: x_o.to_vec(),
        boundary: true,
        a_o: vec![chosen.column.clone()],
        groups: vec![chosen],
        rejected,
        s: None,
        span: None,
        k_bar: best,
        exponent: 1.0 / best as f64,
        side_conditions: vec![SideCondition {
            name: "gradient of u nonzero at x_o".into(),
            verified: true,
            method: "symbolic derivative".into(),
        }],
        diagnostics: diag,
    })
}

/// Several inequalities `{u_i ≤ 0}` active at `x_o`, one group decreasing all of them.
pub fn certify_fat_multi(
    system: &ControlSystem,
    us: &[Expr],
    x_o: &[f64],
    groups: &[GroupSpec],
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    for u in us {
        check_membership(u, x_o, opts)?;
        check_gradient(u, x_o, opts)?;
    }
    let mut rejected = Vec::new();
    for g in groups {
        let fields = &g.fields;
        let mut per_u = Vec::new();
        let mut failure = None;
        for (i, u) in us.iter().enumerate() {
            // Each constraint carries its own order; search up to the group's bound.
            let mut found = None;
            for k in 1..=g.order {
                if k == 1 && fields.len() > 1 {
                    continue;
                }
                let spec = GroupSpec { fields: fields.clone(), order: k };
                if let Ok(c) = check_group(system, std::slice::from_ref(u), x_o, &spec, opts.tol) {
                    found = Some(c);
                    break;
                }
            }
            match found {
                Some(c) if c.column[0] < 0.0 => per_u.push(c),
                Some(c) => {
                    failure = Some(format!("u_{} has a positive order-{} coefficient", i + 1, c.group.order));
                    break;
                }
                None => {
                    failure = Some(format!("u_{} has no decrease rate up to order {}", i + 1, g.order));
                    break;
                }
            }
        }
        if let Some(why) = failure {
            rejected.push(RejectedGroup { group: g.clone(), reason: why });
            continue;
        }
        let k_bar = per_u.iter().map(|c| c.group.order).max().unwrap_or(1);
        let mut diag = diagnostics(&per_u, opts.tol);
        diag.bounds = estimate_bounds(system, x_o, opts.seed).ok();
        return Ok(StlaCertificate {
            theorem: TheoremTag::FatMulti,
            x_o: x_o.to_vec(),
            boundary: true,
            a_o: per_u.iter().map(|c| c.column.clone()).collect(),
            groups: per_u,
            rejected,
            s: None,
            span: None,
            k_bar,
            exponent: 1.0 / k_bar as f64,
            side_conditions: vec![SideCondition {
                name: "gradients of all u_i nonzero at x_o".into(),
                verified: true,
                method: "symbolic derivative".into(),
            }],
            diagnostics: diag,
        });
    }
    Err(EngineError::NoGroupQualifies(summarise(&rejected)))
}

/// Nonsmooth `u` handled through a smooth `Φ` touching from above at `x_o`.
/// The local-maximum premise on `u − Φ` is the caller's assertion; with
/// `spot_check = Some(count)` it is also sampled on `B_R(x_o)`.
pub fn certify_fat_comparison(
    system: &ControlSystem,
    u: &Expr,
    phi: &Expr,
    x_o: &[f64],
    groups: &[GroupSpec],
    spot_check: Option<usize>,
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    let mut cert = certify_fat(system, phi, x_o, groups, opts)?;
    cert.theorem = TheoremTag::FatComparison;
    let base = u.eval_point(x_o)? - phi.eval_point(x_o)?;
    let premise = match spot_check {
        None => SideCondition {
            name: "u - phi has a local maximum at x_o".into(),
            verified: false,
            method: "caller assertion".into(),
        },
        Some(count) => {
            let pts = halton_ball(x_o, system.radius, count);
            let mut worst = f64::NEG_INFINITY;
            for p in &pts {
                if let (Ok(a), Ok(b)) = (u.eval_point(p), phi.eval_point(p)) {
                    worst = worst.max(a - b - base);
                }
            }
            let ok = worst <= opts.target_tol;
            if !ok {
                return Err(EngineError::SideConditionFailed(format!(
                    "u - phi exceeds its value at x_o by {worst:e} on a sample"
                )));
            }
            SideCondition {
                name: "u - phi has a local maximum at x_o".into(),
                verified: true,
                method: format!("caller assertion, sampled on {count} points"),
            }
        }
    };
    cert.side_conditions.push(premise);
    Ok(cert)
}

fn summarise(rejected: &[RejectedGroup]) -> String {
    if rejected.is_empty() {
        return "no candidate groups".into();
    }
    rejected
        .iter()
        .map(|r| format!("{}: {}", r.group.label(), r.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

fn check_vector_groups(
    system: &ControlSystem,
    us: &[Expr],
    x_o: &[f64],
    groups: &[GroupSpec],
    opts: &EngineOptions,
) -> (Vec<CheckedGroup>, Vec<RejectedGroup>) {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for g in groups {
        match check_group(system, us, x_o, g, opts.tol) {
            Ok(c) => ok.push(c),
            Err(e) => rejected.push(RejectedGroup { group: g.clone(), reason: e.to_string() }),
        }
    }
    (ok, rejected)
}

fn columns_matrix(cols: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Point target `{x_o}`.
pub fn certify_point(
    system: &ControlSystem,
    x_o: &[f64],
    groups: &[GroupSpec],
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    let n = system.n();
    if x_o.len() != n {
        return Err(EngineError::DimensionMismatch(format!("x_o has {} coordinates for {n} variables", x_o.len())));
    }
    let us = point_functions(x_o);
    let (ok, rejected) = check_vector_groups(system, &us, x_o, groups, opts);
    if ok.is_empty() {
        return Err(EngineError::NotPositiveBasis(format!("no group passed its order claim ({})", summarise(&rejected))));
    }
    let cols: Vec<Vec<f64>> = ok.iter().map(|g| g.column.clone()).collect();
    let a = columns_matrix(&cols, n);
    let span = is_positive_basis(&a)?;
    if !span.verdict {
        return Err(EngineError::NotPositiveBasis(format!(
            "rank {} of {n}, margin {:e}",
            span.rank, span.margin
        )));
    }
    let k_bar = ok.iter().map(|g| g.group.order).max().expect("nonempty");
    let mut diag = diagnostics(&ok, opts.tol);
    diag.eccentricity = span.lambda.as_ref().and_then(|l| eccentricity(l).ok());
    diag.bounds = estimate_bounds(system, x_o, opts.seed).ok();
    Ok(StlaCertificate {
        theorem: TheoremTag::Point,
        x_o: x_o.to_vec(),
        boundary: false,
        a_o: cols,
        groups: ok,
        rejected,
        s: None,
        span: Some(span),
        k_bar,
        exponent: 1.0 / k_bar as f64,
        side_conditions: Vec::new(),
        diagnostics: diag,
    })
}

/// Side condition used to pass from (B1)/(B2) to attainability of a manifold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldVariant {
    /// All lower-order coefficients of the identity vanish.
    StrictExtra,
    /// Restricted-variable structure; variables inferred when `None`.
    RestrictedVars(Option<Vec<usize>>),
    /// Invertible leading Jacobian block with decoupled trailing coordinates.
    BlockStructure,
    /// Tries the three variants above in order.
    Auto,
}

const STRUCTURE_SAMPLES: usize = 8;

/// Sample points for structural checks: `x_o` and a few points of `B_R(x_o)`.
fn structure_points(system: &ControlSystem, x_o: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut pts = vec![x_o.to_vec()];
    let all = halton_ball(x_o, system.radius, STRUCTURE_SAMPLES + seed as usize);
    pts.extend(all.into_iter().skip(seed as usize));
    pts
}

/// First variable in `outside` on which `e` depends, judged by jet coefficients at the sample points.
fn dependence_outside(e: &Expr, outside: &[usize], points: &[Vec<f64>], tol: f64) -> Result<Option<usize>, EngineError> {
    for p in points {
        let g = lift(e, p, 3)?;
        let scale = g.poly.max_abs_coeff();
        for (m, c) in g.poly.terms() {
            if let Some(&v) = outside.iter().find(|&&v| m.get(v) > 0) {
                if !vanishes(*c, scale, tol) {
                    return Ok(Some(v));
                }
            }
        }
    }
    Ok(None)
}

/// `Du·F` for each target function and palette field.
fn du_f(system: &ControlSystem, us: &[Expr]) -> Vec<Expr> {
    let mut out = Vec::new();
    for f in system.palette() {
        for u in us {
            let e = f.components.iter().enumerate().fold(Expr::constant(0.0), |acc, (j, fj)| {
                Expr::add(acc, Expr::mul(u.symbolic_partial(j), fj.clone()))
            });
            out.push(e);
        }
    }
    out
}

/// Smallest variable set closed under the restricted-variable dependence rules.
pub fn infer_restricted_vars(
    system: &ControlSystem,
    us: &[Expr],
    x_o: &[f64],
    opts: &EngineOptions,
) -> Result<Vec<usize>, EngineError> {
    let n = system.n();
    let pts = structure_points(system, x_o, opts.seed);
    let depends = |e: &Expr, set: &[usize]| -> Result<Vec<usize>, EngineError> {
        let mut found = Vec::new();
        for v in 0..n {
            if set.contains(&v) {
                continue;
            }
            if dependence_outside(e, &[v], &pts, opts.tol)?.is_some() {
                found.push(v);
            }
        }
        Ok(found)
    };
    let mut set: Vec<usize> = Vec::new();
    for e in du_f(system, us) {
        for v in depends(&e, &set)? {
            if !set.contains(&v) {
                set.push(v);
            }
        }
    }
    loop {
        let mut added = false;
        for &l in set.clone().iter() {
            for f in system.palette() {
                for v in depends(&f.components[l], &set)? {
                    if !set.contains(&v) {
                        set.push(v);
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }
    set.sort_unstable();
    Ok(set)
}

/// `(⊞)^r I_j(x_o) = 0` for `r < k_i`, all groups, `j ∈ coords`.
fn identity_vanishing(
    system: &ControlSystem,
    x_o: &[f64],
    groups: &[CheckedGroup],
    coords: &[usize],
    tol: f64,
) -> Result<Result<(), String>, EngineError> {
    let id = identity_functions(system.n());
    for g in groups {
        let k = g.group.order;
        if k == 1 {
            continue;
        }
        let (raw, scale) = group_coefficients(system, &id, x_o, &g.group.fields, k - 1)?;
        for (r, v) in raw.iter().enumerate() {
            for &j in coords {
                if !vanishes(v[j], scale, tol) {
                    return Ok(Err(format!(
                        "{}: order-{} coefficient of x{} is {:e}",
                        g.group.label(),
                        r + 1,
                        j + 1,
                        v[j]
                    )));
                }
            }
        }
    }
    Ok(Ok(()))
}

fn verify_variant(
    system: &ControlSystem,
    us: &[Expr],
    x_o: &[f64],
    groups: &[CheckedGroup],
    variant: &ManifoldVariant,
    opts: &EngineOptions,
) -> Result<Result<(TheoremTag, Vec<SideCondition>), String>, EngineError> {
    let n = system.n();
    match variant {
        ManifoldVariant::StrictExtra => {
            let all: Vec<usize> = (0..n).collect();
            Ok(identity_vanishing(system, x_o, groups, &all, opts.tol)?.map(|_| {
                (
                    TheoremTag::Manifold,
                    vec![SideCondition {
                        name: "lower-order coefficients of the identity vanish".into(),
                        verified: true,
                        method: "jet evaluation at x_o".into(),
                    }],
                )
            }))
        }
        ManifoldVariant::RestrictedVars(declared) => {
            let set = match declared {
                Some(v) => v.clone(),
                None => infer_restricted_vars(system, us, x_o, opts)?,
            };
            let outside: Vec<usize> = (0..n).filter(|v| !set.contains(v)).collect();
            let pts = structure_points(system, x_o, opts.seed);
            for e in du_f(system, us) {
                if let Some(v) = dependence_outside(&e, &outside, &pts, opts.tol)? {
                    return Ok(Err(format!("Du·F depends on {}", system.variables[v])));
                }
            }
            for f in system.palette() {
                for &l in &set {
                    if let Some(v) = dependence_outside(&f.components[l], &outside, &pts, opts.tol)? {
                        return Ok(Err(format!(
                            "component {} of `{}` depends on {}",
                            system.variables[l], f.name, system.variables[v]
                        )));
                    }
                }
            }
            if let Err(why) = identity_vanishing(system, x_o, groups, &set, opts.tol)? {
                return Ok(Err(why));
            }
            let names: Vec<&str> = set.iter().map(|&v| system.variables[v].as_str()).collect();
            Ok(Ok((
                TheoremTag::CorollaryRestricted,
                vec![
                    SideCondition {
                        name: format!("Du·F and F_l depend only on {{{}}}", names.join(", ")),
                        verified: true,
                        method: format!(
                            "sampled structural check (jets at x_o and {STRUCTURE_SAMPLES} points){}",
                            if declared.is_some() { "" } else { "; variables inferred" }
                        ),
                    },
                    SideCondition {
                        name: "Lipschitz bound of Du·F in the restricted variables".into(),
                        verified: true,
                        method: "implied by restricted dependence of smooth data".into(),
                    },
                    SideCondition {
                        name: "lower-order coefficients of the restricted coordinates vanish".into(),
                        verified: true,
                        method: "jet evaluation at x_o".into(),
                    },
                ],
            )))
        }
        ManifoldVariant::BlockStructure => {
            let lead = us.len();
            if lead > n {
                return Ok(Err("more target functions than variables".into()));
            }
            let jac = jacobian(us, x_o)?;
            let block = jac.view((0, 0), (lead, lead)).clone_owned();
            if rank(&block) < lead {
                return Ok(Err(format!("leading {lead}x{lead} Jacobian block is singular")));
            }
            let trailing: Vec<usize> = (lead..n).collect();
            let leading: Vec<usize> = (0..lead).collect();
            let pts = structure_points(system, x_o, opts.seed);
            for f in system.palette() {
                for &l in &trailing {
                    if let Some(v) = dependence_outside(&f.components[l], &leading, &pts, opts.tol)? {
                        return Ok(Err(format!(
                            "component {} of `{}` depends on {}",
                            system.variables[l], f.name, system.variables[v]
                        )));
                    }
                }
            }
            if let Err(why) = identity_vanishing(system, x_o, groups, &trailing, opts.tol)? {
                return Ok(Err(why));
            }
            Ok(Ok((
                TheoremTag::CorollaryBlock,
                vec![
                    SideCondition {
                        name: format!("leading {lead}x{lead} Jacobian block invertible"),
                        verified: true,
                        method: "pivoted QR rank at x_o".into(),
                    },
                    SideCondition {
                        name: "trailing components depend only on trailing coordinates".into(),
                        verified: true,
                        method: format!("sampled structural check (jets at x_o and {STRUCTURE_SAMPLES} points)"),
                    },
                    SideCondition {
                        name: "lower-order coefficients of trailing coordinates vanish".into(),
                        verified: true,
                        method: "jet evaluation at x_o".into(),
                    },
                ],
            )))
        }
        ManifoldVariant::Auto => {
            let mut why = Vec::new();
            for v in [
                ManifoldVariant::StrictExtra,
                ManifoldVariant::RestrictedVars(None),
                ManifoldVariant::BlockStructure,
            ] {
                match verify_variant(system, us, x_o, groups, &v, opts)? {
                    Ok(done) => return Ok(Ok(done)),
                    Err(e) => why.push(format!("{v:?}: {e}")),
                }
            }
            Ok(Err(why.join("; ")))
        }
    }
}

/// Manifold target, possibly with boundary.
pub fn certify_manifold(
    system: &ControlSystem,
    target: &TargetDef,
    x_o: &[f64],
    groups: &[GroupSpec],
    variant: &ManifoldVariant,
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    let n = system.n();
    let h = target.equations.len();
    if h == 0 || h > n {
        return Err(EngineError::DimensionMismatch(format!("{h} equations for {n} variables")));
    }
    for (i, u) in target.equations.iter().enumerate() {
        let v = u.eval_point(x_o)?;
        if v.abs() > opts.target_tol {
            return Err(EngineError::NotInTarget(format!("u_{}(x_o) = {v:e}", i + 1)));
        }
    }
    let (us, boundary) = target.functions_at(x_o, opts.target_tol)?;
    let jac = jacobian(&us, x_o)?;
    let r = rank(&jac);
    if r < us.len() {
        return Err(EngineError::RankDeficientJacobian(format!("rank {r} for {} functions", us.len())));
    }
    let (ok, rejected) = check_vector_groups(system, &us, x_o, groups, opts);
    if ok.is_empty() {
        return Err(EngineError::NotPositiveBasis(format!("no group passed its order claim ({})", summarise(&rejected))));
    }
    let cols: Vec<Vec<f64>> = ok.iter().map(|g| g.column[..h].to_vec()).collect();
    let a = columns_matrix(&cols, h);
    let (span, s) = if boundary {
        let s: Vec<f64> = ok.iter().map(|g| g.column[h]).collect();
        (check_boundary(&a, &s)?, Some(s))
    } else {
        (is_positive_basis(&a)?, None)
    };
    if !span.verdict {
        return Err(EngineError::NotPositiveBasis(format!(
            "rank {} of {h}, margin {:e}{}",
            span.rank,
            span.margin,
            if boundary { ", boundary row included" } else { "" }
        )));
    }
    let eq_only = &us[..h];
    let side = match verify_variant(system, eq_only, x_o, &ok, variant, opts)? {
        Ok(v) => v,
        Err(why) => return Err(EngineError::SideConditionFailed(why)),
    };
    let (mut theorem, side_conditions) = side;
    if boundary && theorem == TheoremTag::Manifold {
        theorem = TheoremTag::ManifoldBoundary;
    }
    let k_bar = ok.iter().map(|g| g.group.order).max().expect("nonempty");
    let mut diag = diagnostics(&ok, opts.tol);
    diag.eccentricity = span.lambda.as_ref().and_then(|l| eccentricity(l).ok());
    diag.bounds = estimate_bounds(system, x_o, opts.seed).ok();
    Ok(StlaCertificate {
        theorem,
        x_o: x_o.to_vec(),
        boundary,
        a_o: cols,
        groups: ok,
        rejected,
        s,
        span: Some(span),
        k_bar,
        exponent: 1.0 / k_bar as f64,
        side_conditions,
        diagnostics: diag,
    })
}

/// Dispatches on the target kind.
pub fn certify(
    system: &ControlSystem,
    target: &TargetDef,
    x_o: &[f64],
    groups: &[GroupSpec],
    variant: &ManifoldVariant,
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    match target.kind {
        TargetKind::Fat => {
            let u = target.inequality.as_ref().ok_or_else(|| EngineError::NotInTarget("fat target without u".into()))?;
            certify_fat(system, u, x_o, groups, opts)
        }
        TargetKind::Point => certify_point(system, x_o, groups, opts),
        TargetKind::Manifold => certify_manifold(system, target, x_o, groups, variant, opts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Largest number of groups returned.
    pub m_max: usize,
    pub k_max: u32,
    pub length_max: usize,
    /// Cap on candidate evaluations.
    pub budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { m_max: 16, k_max: 4, length_max: 2, budget: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundGroup {
    pub group: GroupSpec,
    /// Normalised order-`k` entry.
    pub column: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub groups: Vec<FoundGroup>,
    pub evaluated: usize,
    /// The candidate budget ran out before enumeration finished.
    pub exhausted: bool,
}

fn candidate_tuples(p: usize, length_max: usize, budget: usize) -> (Vec<Vec<usize>>, bool) {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..length_max {
        let mut next = Vec::new();
        for t in &frontier {
            for i in 0..p {
                if t.last() == Some(&i) {
                    continue;
                }
                if out.len() >= budget {
                    return (out, true);
                }
                let mut c = t.clone();
                c.push(i);
                out.push(c.clone());
                next.push(c);
            }
        }
        frontier = next;
    }
    (out, false)
}

/// Enumerates ordered tuples of palette fields and keeps those with a
/// qualifying first nonzero coefficient. For fat targets the coefficient
/// must be negative; otherwise it must not vanish.
pub fn search_groups(
    system: &ControlSystem,
    target: &TargetDef,
    x_o: &[f64],
    search: &SearchOptions,
    opts: &EngineOptions,
) -> Result<SearchResult, EngineError> {
    let (us, _) = target.functions_at(x_o, opts.target_tol)?;
    let fat = target.kind == TargetKind::Fat;
    let palette = system.palette();
    let (tuples, exhausted) = candidate_tuples(palette.len(), search.length_max, search.budget);
    let evaluated = tuples.len();
    let k_max = search.k_max;
    let mut found: Vec<(Vec<usize>, FoundGroup)> = tuples
        .par_iter()
        .filter_map(|t| {
            let names: Vec<String> = t.iter().map(|&i| palette[i].name.clone()).collect();
            let (raw, scale) = group_coefficients(system, &us, x_o, &names, k_max).ok()?;
            let k = (1..=k_max).find(|&r| raw[r as usize - 1].iter().any(|v| !vanishes(*v, scale, opts.tol)))?;
            if k == 1 && t.len() > 1 {
                return None;
            }
            let column: Vec<f64> = raw[k as usize - 1].iter().map(|v| v / factorial(k)).collect();
            if fat && column[0] >= 0.0 {
                return None;
            }
            Some((t.clone(), FoundGroup { group: GroupSpec { fields: names, order: k }, column }))
        })
        .collect();
    found.sort_by(|a, b| (a.1.group.order, a.0.len(), &a.0).cmp(&(b.1.group.order, b.0.len(), &b.0)));
    let mut kept: Vec<FoundGroup> = Vec::new();
    for (_, g) in found {
        let dup = kept.iter().any(|k| {
            if k.group.order != g.group.order {
                return false;
            }
            if fat {
                let (a, b) = (k.column[0], g.column[0]);
                (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
            } else {
                cosine(&k.column, &g.column) > 0.999
            }
        });
        if !dup {
            kept.push(g);
        }
        if kept.len() >= search.m_max {
            break;
        }
    }
    Ok(SearchResult { groups: kept, evaluated, exhausted })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Searches for groups and certifies with the smallest order bound that succeeds.
pub fn search_and_certify(
    system: &ControlSystem,
    target: &TargetDef,
    x_o: &[f64],
    search: &SearchOptions,
    variant: &ManifoldVariant,
    opts: &EngineOptions,
) -> Result<StlaCertificate, EngineError> {
    let found = search_groups(system, target, x_o, search, opts)?;
    let mut last = EngineError::NoGroupQualifies("search found no candidate groups".into());
    for k in 1..=search.k_max {
        let groups: Vec<GroupSpec> =
            found.groups.iter().filter(|g| g.group.order <= k).map(|g| g.group.clone()).collect();
        if groups.is_empty() {
            continue;
        }
        match certify(system, target, x_o, &groups, variant, opts) {
            Ok(c) => return Ok(c),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Field bounds on `B_R(x_o)` from 512 quasi-random samples with safety factor 1.25.
pub fn estimate_bounds(system: &ControlSystem, x_o: &[f64], seed: u64) -> Result<SystemBounds, EngineError> {
    let r = system.radius;
    let skip = seed as usize;
    let pts: Vec<Vec<f64>> = halton_ball(x_o, r, 512 + skip).into_iter().skip(skip).collect();
    let n = system.n();
    let mut m: f64 = 0.0;
    let mut l: f64 = 0.0;
    for f in system.palette() {
        let jac_exprs: Vec<Vec<Expr>> =
            f.components.iter().map(|c| (0..n).map(|j| c.symbolic_partial(j)).collect()).collect();
        for p in pts.iter().chain(std::iter::once(&x_o.to_vec())) {
            let v = f.eval(p)?;
            m = m.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
            let mut jac = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    jac[(i, j)] = jac_exprs[i][j].eval_point(p)?;
                }
            }
            l = l.max(jac.svd(false, false).singular_values.max());
        }
    }
    let m = 1.25 * m;
    let l = 1.25 * l;
    let sigma = if m > 0.0 { r / (2.0 * m) } else { f64::INFINITY };
    Ok(SystemBounds { radius: r, lipschitz: l, sup_norm: m, sigma })
}
