//! Switched-trajectory simulation and the numerical checks built on it.

use std::io::Write;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    estimate_bounds, group_coefficients, point_functions, ControlSystem, EngineError, GroupSpec, StlaCertificate,
    TargetDef, TargetKind, VectorFieldDef,
};
use crate::expr::{Expr, ExprError};
use crate::jet::factorial;
use crate::petrov::{self, PetrovError, PetrovProblem, PetrovSolution};
use crate::sampling::unit_directions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Petrov(#[from] PetrovError),
    #[error("trajectory left B_R(x_o) at t = {time}: distance {distance}")]
    ExitedLocality { time: f64, distance: f64 },
    #[error("step size underflow on leg {0}")]
    StepUnderflow(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("start point at distance {distance} lies outside the basin radius {limit}")]
    NotInBasin { distance: f64, limit: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub field: String,
    pub duration: f64,
}

/// Ordered legs with checkpoints `T_i` at the end of each group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSchedule {
    pub legs: Vec<Leg>,
    pub checkpoints: Vec<f64>,
}

impl SwitchSchedule {
    /// Each field runs for time `t`.
    pub fn balanced(fields: &[String], t: f64) -> Result<Self, LabError> {
        Self::from_legs(fields.iter().map(|f| Leg { field: f.clone(), duration: t }).collect())
    }

    pub fn from_legs(legs: Vec<Leg>) -> Result<Self, LabError> {
        if let Some(l) = legs.iter().find(|l| !(l.duration >= 0.0) || !l.duration.is_finite()) {
            return Err(LabError::InvalidSchedule(format!("leg `{}` has duration {}", l.field, l.duration)));
        }
        let total = legs.iter().map(|l| l.duration).sum();
        Ok(SwitchSchedule { legs, checkpoints: vec![total] })
    }

    /// Group `i` runs each of its `j(i)` fields for `τ_i^{1/k_i}`.
    pub fn from_groups(groups: &[GroupSpec], tau: &[f64]) -> Result<Self, LabError> {
        if groups.len() != tau.len() {
            return Err(LabError::InvalidSchedule(format!("{} groups, {} durations", groups.len(), tau.len())));
        }
        let mut legs = Vec::new();
        let mut checkpoints = Vec::new();
        let mut t = 0.0;
        for (g, &ti) in groups.iter().zip(tau) {
            if !(ti >= 0.0) {
                return Err(LabError::InvalidSchedule(format!("negative duration {ti}")));
            }
            let d = ti.powf(1.0 / g.order as f64);
            for f in &g.fields {
                legs.push(Leg { field: f.clone(), duration: d });
            }
            t += g.fields.len() as f64 * d;
            checkpoints.push(t);
        }
        Ok(SwitchSchedule { legs, checkpoints })
    }

    pub fn total_time(&self) -> f64 {
        self.legs.iter().map(|l| l.duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub steps_per_leg: usize,
    /// Ball `B_R(center)` the trajectory must stay in.
    pub locality: Option<(Vec<f64>, f64)>,
    /// Also integrate with half the step and record the difference.
    pub richardson: bool,
    /// Keep every `record_every`-th state; 0 keeps leg endpoints only.
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { steps_per_leg: 1000, locality: None, richardson: false, record_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub end: Vec<f64>,
    pub steps: usize,
    /// `|x_h − x_{h/2}| / 15` when requested.
    pub error_estimate: Option<f64>,
}

struct Rhs<'a> {
    fields: Vec<&'a VectorFieldDef>,
}

fn eval_into(f: &VectorFieldDef, x: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
    for (o, c) in out.iter_mut().zip(&f.components) {
        *o = c.eval_point(x)?;
    }
    Ok(())
}

fn rk4_legs(
    rhs: &Rhs,
    schedule: &SwitchSchedule,
    x0: &[f64],
    steps: usize,
    opts: &SimOptions,
    record: bool,
) -> Result<SimResult, LabError> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut samples = if record { vec![(0.0, x.clone())] } else { Vec::new() };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut count = 0;
    for (li, (leg, f)) in schedule.legs.iter().zip(&rhs.fields).enumerate() {
        let start = t;
        if leg.duration == 0.0 {
            continue;
        }
        let h = leg.duration / steps as f64;
        if h == 0.0 || t + h == t {
            return Err(LabError::StepUnderflow(li));
        }
        for s in 0..steps {
            eval_into(f, &x, &mut k1)?;
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            eval_into(f, &tmp, &mut k2)?;
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            eval_into(f, &tmp, &mut k3)?;
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            eval_into(f, &tmp, &mut k4)?;
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            count += 1;
            let now = if s + 1 == steps { start + leg.duration } else { start + leg.duration * (s + 1) as f64 / steps as f64 };
            if let Some((c, r)) = &opts.locality {
                let d = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if d > *r {
                    return Err(LabError::ExitedLocality { time: now, distance: d });
                }
            }
            if record && ((opts.record_every > 0 && (s + 1) % opts.record_every == 0) || s + 1 == steps) {
                if samples.last().map_or(true, |(tt, _)| *tt < now) {
                    samples.push((now, x.clone()));
                }
            }
        }
        t += leg.duration;
    }
    Ok(SimResult { samples, end: x, steps: count, error_estimate: None })
}

/// Classical RK4 with a fixed number of steps per leg.
pub fn integrate_switched(
    system: &ControlSystem,
    schedule: &SwitchSchedule,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<SimResult, LabError> {
    if x0.len() != system.n() {
        return Err(EngineError::DimensionMismatch(format!("start has {} coordinates", x0.len())).into());
    }
    if opts.steps_per_leg == 0 {
        return Err(LabError::InvalidSchedule("zero steps per leg".into()));
    }
    let fields = schedule.legs.iter().map(|l| system.field(&l.field)).collect::<Result<Vec<_>, _>>()?;
    let rhs = Rhs { fields };
    let mut res = rk4_legs(&rhs, schedule, x0, opts.steps_per_leg, opts, true)?;
    if opts.richardson {
        let fine = rk4_legs(&rhs, schedule, x0, 2 * opts.steps_per_leg, opts, false)?;
        let d = res.end.iter().zip(&fine.end).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        res.error_estimate = Some(d / 15.0);
    }
    Ok(res)
}

fn end_state(system: &ControlSystem, schedule: &SwitchSchedule, x0: &[f64], steps: usize) -> Result<Vec<f64>, LabError> {
    let opts = SimOptions { steps_per_leg: steps, ..SimOptions::default() };
    let fields = schedule.legs.iter().map(|l| system.field(&l.field)).collect::<Result<Vec<_>, _>>()?;
    Ok(rk4_legs(&Rhs { fields }, schedule, x0, steps, &opts, false)?.end)
}

/// Least-squares line through `(ln x, ln y)`; returns slope and intercept.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<(f64, f64), LabError> {
    if points.len() < 3 {
        return Err(LabError::InsufficientSamples(format!("{} points for a log-log fit", points.len())));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub order: u32,
    pub slope: f64,
    pub intercept: f64,
    /// `(t, |u(x_{mt}) − series|)` for every grid point, including dropped ones.
    pub table: Vec<(f64, f64)>,
    pub used: usize,
}

const EXPANSION_GRID: usize = 12;
const RESIDUAL_FLOOR: f64 = 1e-13;

/// Fits the decay rate of the remainder after the order-`k` truncated series
/// along the balanced trajectory of `fields` from `x_o`.
pub fn expansion_residual_order(
    system: &ControlSystem,
    fields: &[String],
    u: &Expr,
    x_o: &[f64],
    k: u32,
) -> Result<ExpansionFit, LabError> {
    let (raw, _) = group_coefficients(system, std::slice::from_ref(u), x_o, fields, k)?;
    let u0 = u.eval_point(x_o)?;
    let (lo, hi) = (1e-3f64, 1e-1f64);
    let mut table = Vec::with_capacity(EXPANSION_GRID);
    for i in 0..EXPANSION_GRID {
        let t = lo * (hi / lo).powf(i as f64 / (EXPANSION_GRID - 1) as f64);
        let end = end_state(system, &SwitchSchedule::balanced(fields, t)?, x_o, 1000)?;
        let series: f64 = u0 + (1..=k).map(|r| raw[r as usize - 1][0] * t.powi(r as i32) / factorial(r)).sum::<f64>();
        table.push((t, (u.eval_point(&end)? - series).abs()));
    }
    let floor = RESIDUAL_FLOOR * u0.abs().max(1.0);
    let kept: Vec<(f64, f64)> = table.iter().copied().filter(|(_, r)| *r > floor).collect();
    if kept.len() < 3 {
        return Err(LabError::DegenerateFit(format!(
            "{} of {EXPANSION_GRID} residuals above the rounding floor {floor:e}",
            kept.len()
        )));
    }
    let (slope, intercept) = loglog_fit(&kept)?;
    Ok(ExpansionFit { order: k, slope, intercept, used: kept.len(), table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachOptions {
    pub steps_per_leg: usize,
    /// Target residual accepted as reached.
    pub tol: f64,
    /// Largest start distance `δ'`; `R/2` when absent.
    pub basin: Option<f64>,
    pub petrov_tol: f64,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions { steps_per_leg: 1000, tol: 1e-6, basin: None, petrov_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTimeEstimate {
    pub start: Vec<f64>,
    pub reached: bool,
    /// Upper bound `Σ j(i) τ_i^{1/k_i}` on the minimum time.
    pub t_est: f64,
    /// `|u(x_end) − u(x_o)|`.
    pub residual: f64,
    pub tau: Vec<f64>,
    pub end: Vec<f64>,
    pub error_estimate: Option<f64>,
    pub petrov: Option<PetrovSolution>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Builds a control from `x` to the target following the certificate's groups.
pub fn reach_target(
    system: &ControlSystem,
    target: &TargetDef,
    x: &[f64],
    cert: &StlaCertificate,
    opts: &ReachOptions,
) -> Result<MinTimeEstimate, LabError> {
    let x_o = &cert.x_o;
    let limit = opts.basin.unwrap_or(system.radius / 2.0);
    let d = distance(x, x_o);
    if d > limit {
        return Err(LabError::NotInBasin { distance: d, limit });
    }
    match target.kind {
        TargetKind::Fat => reach_fat(system, target, x, cert, opts),
        TargetKind::Point | TargetKind::Manifold => reach_vector(system, target, x, cert, opts),
    }
}

fn reach_fat(
    system: &ControlSystem,
    target: &TargetDef,
    x: &[f64],
    cert: &StlaCertificate,
    opts: &ReachOptions,
) -> Result<MinTimeEstimate, LabError> {
    let u = target.inequality.as_ref().ok_or_else(|| EngineError::NotInTarget("fat target without u".into()))?;
    let group = cert.groups.first().ok_or_else(|| LabError::InvalidSchedule("certificate has no group".into()))?;
    let fields = &group.group.fields;
    let m = fields.len() as f64;
    let u_x = u.eval_point(x)?;
    let done = |t: f64, end: Vec<f64>, res: f64, reached: bool| MinTimeEstimate {
        start: x.to_vec(),
        reached,
        t_est: m * t,
        residual: res,
        tau: vec![t.powi(group.group.order as i32)],
        end,
        error_estimate: None,
        petrov: None,
    };
    if u_x <= 0.0 {
        return Ok(done(0.0, x.to_vec(), 0.0, true));
    }
    let bounds = estimate_bounds(system, &cert.x_o, 0)?;
    let t_max = if bounds.sigma.is_finite() { bounds.sigma / m } else { system.radius };
    let value = |t: f64| -> Result<(f64, Vec<f64>), LabError> {
        let end = end_state(system, &SwitchSchedule::balanced(fields, t)?, x, opts.steps_per_leg)?;
        Ok((u.eval_point(&end)?, end))
    };
    // Start near the leading-order prediction and walk to a sign change.
    let k = group.group.order;
    let rate = group.column[0].abs();
    let guess = if rate > 0.0 { (u_x / rate).powf(1.0 / k as f64) } else { t_max };
    let mut t = (0.25 * guess).min(t_max);
    let (mut lo, mut hi);
    let first = value(t)?;
    if first.0 <= 0.0 {
        hi = (t, first);
        loop {
            let tt = 0.5 * hi.0;
            let v = value(tt)?;
            if v.0 > 0.0 {
                lo = tt;
                break;
            }
            hi = (tt, v);
            if tt < 1e-300 {
                return Ok(done(0.0, hi.1.1.clone(), 0.0, true));
            }
        }
    } else {
        lo = t;
        loop {
            t *= 2.0;
            if t > t_max {
                let v = value(t_max)?;
                if v.0 <= 0.0 {
                    hi = (t_max, v);
                    break;
                }
                return Ok(done(t_max, v.1, v.0.abs(), false));
            }
            let v = value(t)?;
            if v.0 <= 0.0 {
                hi = (t, v);
                break;
            }
            lo = t;
        }
    }
    while hi.0 - lo > 1e-13 * hi.0 {
        let mid = 0.5 * (lo + hi.0);
        let v = value(mid)?;
        if v.0 <= 0.0 {
            hi = (mid, v);
        } else {
            lo = mid;
        }
    }
    let (t_star, (u_end, end)) = hi;
    let mut est = done(t_star, end, u_end.abs(), u_end <= opts.tol);
    let check = integrate_switched(
        system,
        &SwitchSchedule::balanced(fields, t_star)?,
        x,
        &SimOptions { steps_per_leg: opts.steps_per_leg, richardson: true, ..SimOptions::default() },
    )?;
    est.error_estimate = check.error_estimate;
    Ok(est)
}

type SimCache = Mutex<Vec<(Vec<f64>, Option<(Vec<f64>, Vec<f64>)>)>>;

fn reach_vector(
    system: &ControlSystem,
    target: &TargetDef,
    x: &[f64],
    cert: &StlaCertificate,
    opts: &ReachOptions,
) -> Result<MinTimeEstimate, LabError> {
    let x_o = cert.x_o.clone();
    let groups = cert.group_specs();
    let m = groups.len();
    let us: Vec<Expr> = match target.kind {
        TargetKind::Point => point_functions(&x_o),
        _ => {
            let mut us = target.equations.clone();
            if cert.boundary {
                us.push(target.inequality.clone().expect("boundary certificates carry an inequality"));
            }
            us
        }
    };
    let h = cert.a_o.first().map_or(0, |c| c.len());
    let rows = us.len();
    let mut a_full = DMatrix::zeros(rows, m);
    for (j, col) in cert.a_o.iter().enumerate() {
        for i in 0..h {
            a_full[(i, j)] = col[i];
        }
        if let Some(s) = &cert.s {
            a_full[(h, j)] = s[j];
        }
    }
    let eval_us = |p: &[f64]| -> Result<Vec<f64>, ExprError> { us.iter().map(|u| u.eval_point(p)).collect() };
    let u_o = DVector::from_vec(eval_us(&x_o)?);
    let t_est = |tau: &[f64]| -> f64 {
        groups.iter().zip(tau).map(|(g, t)| g.fields.len() as f64 * t.max(0.0).powf(1.0 / g.order as f64)).sum()
    };
    if distance(x, &x_o) == 0.0 {
        return Ok(MinTimeEstimate {
            start: x.to_vec(),
            reached: true,
            t_est: 0.0,
            residual: 0.0,
            tau: vec![0.0; m],
            end: x.to_vec(),
            error_estimate: None,
            petrov: None,
        });
    }

    let steps = opts.steps_per_leg;
    let cache: SimCache = Mutex::new(Vec::new());
    // Reference and actual end values of the target functions for a given τ.
    let simulate = |tau: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
        let key: Vec<f64> = tau.iter().map(|t| t.max(0.0)).collect();
        if let Some((_, v)) = cache.lock().expect("cache lock").iter().find(|(k, _)| *k == key) {
            return v.clone();
        }
        let run = || -> Result<(Vec<f64>, Vec<f64>), LabError> {
            let sched = SwitchSchedule::from_groups(&groups, &key)?;
            let r = end_state(system, &sched, &x_o, steps)?;
            let a = end_state(system, &sched, x, steps)?;
            Ok((eval_us(&r)?, eval_us(&a)?))
        };
        let v = run().ok().filter(|(r, a)| r.iter().chain(a).all(|v| v.is_finite()));
        let mut c = cache.lock().expect("cache lock");
        if c.len() >= 8 {
            c.remove(0);
        }
        c.push((key, v.clone()));
        v
    };
    let nan_vec = DVector::from_element(rows, f64::NAN);
    let rho = |tau: &[f64]| -> DVector<f64> {
        match simulate(tau) {
            Some((r, a)) => DVector::from_iterator(rows, r.iter().zip(&a).map(|(p, q)| p - q)),
            None => nan_vec.clone(),
        }
    };
    // Every column carries the measured series residual, so (A_o + γ)τ equals
    // the reference displacement exactly.
    let gamma = |tau: &[f64]| -> DMatrix<f64> {
        let total: f64 = tau.iter().map(|t| t.max(0.0)).sum();
        if total == 0.0 {
            return DMatrix::zeros(rows, m);
        }
        match simulate(tau) {
            Some((r, _)) => {
                let tv = DVector::from_iterator(m, tau.iter().map(|t| t.max(0.0)));
                let c = (DVector::from_vec(r) - &u_o - &a_full * tv) / total;
                DMatrix::from_fn(rows, m, |i, _| c[i])
            }
            None => DMatrix::from_element(rows, m, f64::NAN),
        }
    };
    let a_o = DMatrix::from_fn(h, m, |i, j| a_full[(i, j)]);
    let mut problem = PetrovProblem::new(a_o, Box::new(gamma), Box::new(rho)).with_tol(opts.petrov_tol).lenient();
    if let Some(s) = &cert.s {
        problem = problem.with_boundary(s.clone());
    }
    let sol = petrov::solve(&problem)?;
    let sched = SwitchSchedule::from_groups(&groups, &sol.tau)?;
    let check = integrate_switched(
        system,
        &sched,
        x,
        &SimOptions { steps_per_leg: steps, richardson: true, ..SimOptions::default() },
    )?;
    let u_end = eval_us(&check.end)?;
    let residual = (0..h).map(|i| (u_end[i] - u_o[i]).powi(2)).sum::<f64>().sqrt();
    let side_ok = !cert.boundary || u_end[h] >= u_o[h] - opts.tol;
    Ok(MinTimeEstimate {
        start: x.to_vec(),
        reached: residual <= opts.tol && side_ok,
        t_est: t_est(&sol.tau),
        residual,
        tau: sol.tau.clone(),
        end: check.end,
        error_estimate: check.error_estimate,
        petrov: Some(sol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderSample {
    pub radius: f64,
    pub direction: usize,
    pub t_est: Option<f64>,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub constant: f64,
    /// `1/k̄` from the certificate.
    pub theory: f64,
    pub samples: Vec<HolderSample>,
    /// Largest `T_est` per radius over reached, nonzero samples.
    pub envelope: Vec<(f64, f64)>,
    pub failures: usize,
}

/// Geometric radii on `[1e-6, 1e-4]`.
pub fn default_radii(count: usize) -> Vec<f64> {
    let (lo, hi) = (1e-6f64, 1e-4f64);
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Fits `T_est ≈ C r^e` on the upper envelope of a radius × direction grid.
pub fn holder_fit(
    system: &ControlSystem,
    target: &TargetDef,
    cert: &StlaCertificate,
    radii: &[f64],
    directions: usize,
    opts: &ReachOptions,
) -> Result<HolderFit, LabError> {
    let x_o = &cert.x_o;
    let dirs = unit_directions(system.n(), directions);
    let grid: Vec<(usize, usize)> = (0..radii.len()).flat_map(|i| (0..dirs.len()).map(move |j| (i, j))).collect();
    let samples: Vec<HolderSample> = grid
        .par_iter()
        .map(|&(i, j)| {
            let r = radii[i];
            let x: Vec<f64> = x_o.iter().zip(&dirs[j]).map(|(c, d)| c + r * d).collect();
            match reach_target(system, target, &x, cert, opts) {
                Ok(est) => HolderSample { radius: r, direction: j, t_est: Some(est.t_est), reached: est.reached },
                Err(_) => HolderSample { radius: r, direction: j, t_est: None, reached: false },
            }
        })
        .collect();
    let failures = samples.iter().filter(|s| !s.reached).count();
    let envelope: Vec<(f64, f64)> = radii
        .iter()
        .filter_map(|&r| {
            let best = samples
                .iter()
                .filter(|s| s.radius == r && s.reached)
                .filter_map(|s| s.t_est)
                .filter(|t| *t > 0.0)
                .fold(0.0f64, f64::max);
            (best > 0.0).then_some((r, best))
        })
        .collect();
    if envelope.len() < 3 {
        return Err(LabError::InsufficientSamples(format!("{} radii with positive times", envelope.len())));
    }
    let (exponent, intercept) = loglog_fit(&envelope)?;
    Ok(HolderFit { exponent, constant: intercept.exp(), theory: cert.exponent, samples, envelope, failures })
}

/// Header `t,x1,...,xn`.
pub fn write_trajectory_csv<W: Write>(mut w: W, sim: &SimResult) -> std::io::Result<()> {
    let n = sim.end.len();
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("x{i}"))).collect();
    writeln!(w, "{}", header.join(","))?;
    for (t, x) in &sim.samples {
        let row: Vec<String> = std::iter::once(format!("{t:e}")).chain(x.iter().map(|v| format!("{v:e}"))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Header `radius,direction,t_est`; unreached samples have an empty time.
pub fn write_holder_csv<W: Write>(mut w: W, fit: &HolderFit) -> std::io::Result<()> {
    writeln!(w, "radius,direction,t_est")?;
    for s in &fit.samples {
        let t = match (s.reached, s.t_est) {
            (true, Some(t)) => format!("{t:e}"),
            _ => String::new(),
        };
        writeln!(w, "{:e},{},{}", s.radius, s.direction, t)?;
    }
    Ok(())
}

/// Header `t,residual`.
pub fn write_residual_csv<W: Write>(mut w: W, fit: &ExpansionFit) -> std::io::Result<()> {
    writeln!(w, "t,residual")?;
    for (t, r) in &fit.table {
        writeln!(w, "{t:e},{r:e}")?;
    }
    Ok(())
}
