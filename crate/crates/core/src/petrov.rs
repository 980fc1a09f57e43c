//! Constructive solver for `(A_o + γ(τ))τ = ρ(τ)`, `τ ≥ 0`, when the columns
//! of `A_o` form a positive basis, and for the boundary variant with an extra
//! row `s` and a nonnegative slack in that row.
//!
//! The primary route iterates the fixed-point map
//! `Φ(τ) = |ρ(τ)|·b(τ) + (A_1(τ)^{-1}ρ(τ), 0)` where `A_1` is an invertible
//! block of columns and `b(τ)` is a positive null vector of `A_o + γ(τ)`
//! obtained by correcting `b_o`. Whenever `Φ` is evaluated, `(A_o+γ(τ))Φ(τ) = ρ(τ)`
//! holds exactly, so a fixed point solves the equation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{lp_feasible, LpError};
use crate::sampling::halton;
use crate::span::{check_boundary, is_positive_basis, pivoted_qr, positive_basis_unchecked, rank, SpanError};

pub const MAX_ITERS: usize = 10_000;
const SAFETY: f64 = 1.5;
const STALL_WINDOW: usize = 25;
const MAX_CORNER_DIM: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PetrovError {
    #[error("matrix is rank deficient: rank {rank} < {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("no null vector meets the required floor {0}")]
    InfeasibleWitness(f64),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("hypotheses violated: {0}")]
    BudgetExceeded(String),
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub type MatrixFn<'a> = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Sync + 'a>;
pub type VectorFn<'a> = Box<dyn Fn(&[f64]) -> DVector<f64> + Sync + 'a>;

/// `(A_o + γ(τ))τ = ρ(τ)` with optional boundary row.
pub struct PetrovProblem<'a> {
    pub a_o: DMatrix<f64>,
    /// Perturbation; `(h+1)×m` when a boundary row is present.
    pub gamma: MatrixFn<'a>,
    /// Right-hand side; length `h+1` when a boundary row is present.
    pub rho: VectorFn<'a>,
    pub s: Option<Vec<f64>>,
    /// Radius of the ball where `γ` is sampled; chosen automatically when `None`.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    /// Stop when the perturbation budget fails. When false the iteration
    /// still runs and the violation is reported on the solution.
    pub strict: bool,
}

impl<'a> PetrovProblem<'a> {
    pub fn new(a_o: DMatrix<f64>, gamma: MatrixFn<'a>, rho: VectorFn<'a>) -> Self {
        PetrovProblem { a_o, gamma, rho, s: None, delta: None, tol: 1e-10, max_iters: MAX_ITERS, strict: true }
    }

    /// `γ ≡ 0`, `ρ ≡ v`.
    pub fn constant(a_o: DMatrix<f64>, v: DVector<f64>) -> PetrovProblem<'static> {
        let (h, m) = a_o.shape();
        let rows = if v.len() > h { h + 1 } else { h };
        PetrovProblem::new(a_o, Box::new(move |_| DMatrix::zeros(rows, m)), Box::new(move |_| v.clone()))
    }

    pub fn with_boundary(mut self, s: Vec<f64>) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_radius(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn lenient(mut self) -> Self {
        self.strict = false;
        self
    }

    /// `Ã = (A_o; s)` or `A_o`.
    fn full_matrix(&self) -> DMatrix<f64> {
        match &self.s {
            None => self.a_o.clone(),
            Some(s) => {
                let (h, m) = self.a_o.shape();
                let mut hat = DMatrix::zeros(h + 1, m);
                hat.view_mut((0, 0), (h, m)).copy_from(&self.a_o);
                for (j, v) in s.iter().enumerate() {
                    hat[(h, j)] = *v;
                }
                hat
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PetrovBranch {
    /// `ρ` vanished at `τ = 0`.
    Trivial,
    FixedPoint,
    DampedFixedPoint,
    PatternSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetrovSolution {
    pub tau: Vec<f64>,
    /// Norm of the equation residual (top rows; boundary deficit included).
    pub residual: f64,
    pub iterations: usize,
    pub branch: PetrovBranch,
    /// `K = |b_o| + 1 + M`.
    pub bound_k: f64,
    /// Estimated `M = sup |A_1^{-1}|` with safety factor.
    pub m_estimate: f64,
    pub b_o: Vec<f64>,
    /// Largest `|ρ|` seen on the samples and iterates.
    pub rho_sup: f64,
    /// `|τ| ≤ K·rho_sup`.
    pub bound_ok: bool,
    pub delta: f64,
    /// Slack in the boundary row.
    pub slack: Option<f64>,
    /// Iterations whose step left the nonnegative ball and was clipped.
    pub clipped_steps: usize,
    /// Hypothesis that could not be verified in lenient mode.
    pub violation: Option<String>,
}

impl PetrovSolution {
    pub fn tau_norm(&self) -> f64 {
        self.tau.iter().map(|t| t * t).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSelection {
    /// Column order; the first `h` entries form the block.
    pub perm: Vec<usize>,
    pub a1: DMatrix<f64>,
    pub det: f64,
}

impl BlockSelection {
    fn block_of(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let h = a.nrows();
        DMatrix::from_fn(h, h, |i, j| a[(i, self.perm[j])])
    }

    /// Embeds a vector of length `h` into `R^m` at the block columns.
    fn embed(&self, v: &DVector<f64>, m: usize) -> DVector<f64> {
        let mut out = DVector::zeros(m);
        for (j, x) in v.iter().enumerate() {
            out[self.perm[j]] = *x;
        }
        out
    }
}

/// Chooses `h` columns spanning `R^h` by norm-pivoted QR.
pub fn select_invertible_block(a: &DMatrix<f64>) -> Result<BlockSelection, PetrovError> {
    let h = a.nrows();
    let r = rank(a);
    if r < h {
        return Err(PetrovError::RankDeficient { rank: r, rows: h });
    }
    let (perm, _) = pivoted_qr(a);
    let mut sel = BlockSelection { perm, a1: DMatrix::zeros(0, 0), det: 0.0 };
    sel.a1 = sel.block_of(a);
    sel.det = sel.a1.determinant();
    Ok(sel)
}

/// A vertex of `{b : A b = 0, b_i ≥ floor}`.
pub fn null_witness(a: &DMatrix<f64>, floor: f64) -> Result<DVector<f64>, PetrovError> {
    let m = a.ncols();
    lp_feasible(a, &DVector::zeros(a.nrows()), &vec![floor; m])?.ok_or(PetrovError::InfeasibleWitness(floor))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Nonnegative sample points of the `δ`-ball.
fn box_samples(m: usize, delta: f64) -> Vec<Vec<f64>> {
    let side = delta / (m as f64).sqrt();
    let mut pts = vec![vec![0.0; m], vec![0.5 * side; m]];
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = delta;
        pts.push(e);
    }
    if m <= MAX_CORNER_DIM {
        for mask in 1..(1usize << m) {
            pts.push((0..m).map(|i| if mask >> i & 1 == 1 { side } else { 0.0 }).collect());
        }
    } else {
        for i in 0..1024 {
            pts.push(halton(i, m.min(12)).iter().cycle().take(m).map(|u| u * side).collect());
        }
    }
    pts
}

struct Setup {
    sel: BlockSelection,
    b_o: DVector<f64>,
    m_est: f64,
    k: f64,
    delta: f64,
    rho_sup: f64,
    violation: Option<String>,
}

fn top_rows(m: &DMatrix<f64>, h: usize) -> DMatrix<f64> {
    m.rows(0, h).clone_owned()
}

/// Estimates `M`, `b_o`, `K` on a radius and checks the perturbation budget.
fn setup_at(p: &PetrovProblem, sel: &BlockSelection, delta: f64) -> Result<Result<Setup, String>, PetrovError> {
    let (h, m) = p.a_o.shape();
    let samples = box_samples(m, delta);
    let mut inv_sup: f64 = 0.0;
    let mut inverses = Vec::with_capacity(samples.len());
    for tau in &samples {
        let g = top_rows(&(p.gamma)(tau), h);
        let a1 = sel.block_of(&(&p.a_o + &g));
        let Some(inv) = a1.try_inverse() else {
            return Ok(Err(format!("block singular at τ = {tau:?}")));
        };
        inv_sup = inv_sup.max(spectral_norm(&inv));
        inverses.push((inv, g));
    }
    let m_est = SAFETY * inv_sup;
    let b_o = null_witness(&p.a_o, m_est + 1.0)?;
    let worst = inverses.iter().map(|(inv, g)| (inv * (g * &b_o)).norm()).fold(0.0, f64::max);
    let violation = (worst > 1.0).then(|| format!("|A_1^-1 γ b_o| = {worst:.3e} exceeds 1"));
    let k = b_o.norm() + 1.0 + m_est;
    let rho_sup = samples.iter().map(|t| (p.rho)(t).norm()).fold(0.0, f64::max);
    Ok(Ok(Setup { sel: sel.clone(), b_o, m_est, k, delta, rho_sup, violation }))
}

fn setup(p: &PetrovProblem) -> Result<Setup, PetrovError> {
    let h = p.a_o.nrows();
    let sel = select_invertible_block(&p.a_o)?;
    let cert = if p.s.is_some() { positive_basis_unchecked(&p.a_o)? } else { is_positive_basis(&p.a_o)? };
    if !cert.verdict {
        return Err(PetrovError::BudgetExceeded("columns of A_o are not a positive basis".into()));
    }
    let fixed = p.delta.is_some();
    let mut delta = match p.delta {
        Some(d) => d,
        None => {
            let inv = sel.a1.clone().try_inverse().ok_or(PetrovError::RankDeficient { rank: h - 1, rows: h })?;
            let m0 = SAFETY * spectral_norm(&inv);
            let b0 = null_witness(&p.a_o, m0 + 1.0)?;
            let k0 = b0.norm() + 1.0 + m0;
            let r0 = (p.rho)(&vec![0.0; p.a_o.ncols()]).norm();
            (2.0 * k0 * r0).max(1e-12)
        }
    };
    let mut last = String::new();
    let mut fallback: Option<Setup> = None;
    for _ in 0..40 {
        match setup_at(p, &sel, delta)? {
            Ok(s) if s.violation.is_none() => {
                if s.rho_sup * s.k <= s.delta || fixed {
                    if s.rho_sup * s.k > s.delta {
                        let why = format!("sup|ρ| = {:.3e} exceeds δ/K = {:.3e}", s.rho_sup, s.delta / s.k);
                        if p.strict {
                            return Err(PetrovError::BudgetExceeded(why));
                        }
                        return Ok(Setup { violation: Some(why), ..s });
                    }
                    return Ok(s);
                }
                // Enlarge the radius to contain the fixed-point ball.
                let grown = 2.0 * s.rho_sup * s.k;
                last = format!("sup|ρ|·K = {:.3e} exceeds δ = {:.3e}", s.rho_sup * s.k, s.delta);
                delta = grown;
                fallback = Some(s);
            }
            Ok(s) => {
                let why = s.violation.clone().expect("guarded");
                if fixed {
                    if p.strict {
                        return Err(PetrovError::BudgetExceeded(why));
                    }
                    return Ok(s);
                }
                last = why;
                delta *= 0.5;
                if fallback.as_ref().map_or(true, |f| f.rho_sup * f.k > f.delta) {
                    fallback = Some(s);
                }
            }
            Err(why) => {
                if fixed {
                    return Err(PetrovError::BudgetExceeded(why));
                }
                last = why;
                delta *= 0.5;
            }
        }
    }
    match fallback {
        Some(s) if !p.strict => {
            let delta = s.delta.max(2.0 * s.rho_sup * s.k);
            Ok(Setup { violation: Some(last), delta, ..s })
        }
        _ => Err(PetrovError::BudgetExceeded(last)),
    }
}

fn clip(tau: &mut DVector<f64>, radius: f64) -> bool {
    let mut clipped = false;
    for t in tau.iter_mut() {
        if *t < 0.0 {
            *t = 0.0;
            clipped = true;
        }
    }
    let n = tau.norm();
    if n > radius {
        *tau *= radius / n;
        clipped = true;
    }
    clipped
}

/// Evaluates one step of the map and the residual at `tau`.
struct Eval {
    phi: DVector<f64>,
    residual: f64,
    rho_norm: f64,
}

fn evaluate(p: &PetrovProblem, st: &Setup, tau: &DVector<f64>, boundary: Option<&DVector<f64>>) -> Eval {
    let (h, m) = p.a_o.shape();
    let ts = tau.as_slice();
    let g = (p.gamma)(ts);
    let rho = (p.rho)(ts);
    let a_top = &p.a_o + top_rows(&g, h);
    let rho_top = rho.rows(0, h).clone_owned();
    let res_top = (&a_top * tau - &rho_top).norm();
    let a1 = st.sel.block_of(&a_top);
    let Some(inv) = a1.try_inverse() else {
        return Eval { phi: tau.clone(), residual: f64::INFINITY, rho_norm: rho.norm() };
    };
    let correct = |v: &DVector<f64>| -> DVector<f64> {
        let bump = -(&inv * (top_rows(&g, h) * v));
        v + st.sel.embed(&bump, m)
    };
    let b = correct(&st.b_o);
    let rn = rho_top.norm();
    let mut phi = &b * rn + st.sel.embed(&(&inv * &rho_top), m);
    let mut residual = res_top;
    if let Some(mu_o) = boundary {
        let s_row = p.full_matrix().row(h).clone_owned() + g.row(h);
        let rho_s = rho[h];
        let deficit = rho_s - (&s_row * &phi)[0];
        let mu = correct(mu_o);
        let gain = (&s_row * &mu)[0];
        if deficit > 0.0 && gain > 0.0 {
            phi += mu * (deficit / gain);
        }
        let short = (rho_s - (&s_row * tau)[0]).max(0.0);
        residual = (res_top * res_top + short * short).sqrt();
    }
    Eval { phi, residual, rho_norm: rho.norm() }
}

fn pattern_search(
    p: &PetrovProblem,
    st: &Setup,
    start: &DVector<f64>,
    boundary: Option<&DVector<f64>>,
    budget: usize,
) -> (DVector<f64>, f64, usize) {
    let m = start.len();
    let radius = st.delta.max(st.k * st.rho_sup);
    let mut best = start.clone();
    let mut best_r = evaluate(p, st, &best, boundary).residual;
    let mut step = 0.25 * radius.max(best.norm());
    let mut evals = 0;
    while evals < budget && step > 1e-16 * radius.max(1e-300) && best_r > p.tol {
        let mut improved = false;
        for i in 0..m {
            for sign in [1.0, -1.0] {
                let mut cand = best.clone();
                cand[i] += sign * step;
                clip(&mut cand, radius);
                evals += 1;
                let r = evaluate(p, st, &cand, boundary).residual;
                if r < best_r {
                    best = cand;
                    best_r = r;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_r, evals)
}

fn run(p: &PetrovProblem, boundary: Option<DVector<f64>>) -> Result<PetrovSolution, PetrovError> {
    let (h, m) = p.a_o.shape();
    let st = setup(p)?;
    let mut rho_sup = st.rho_sup;
    let radius = st.delta.max(st.k * st.rho_sup * (1.0 + 1e-9));
    let zero = DVector::zeros(m);
    let mk = |tau: DVector<f64>, residual: f64, iterations, branch, rho_sup: f64, clipped| {
        let slack = boundary.as_ref().map(|_| {
            let g = (p.gamma)(tau.as_slice());
            let rho = (p.rho)(tau.as_slice());
            let s_row = p.full_matrix().row(h).clone_owned() + g.row(h);
            (&s_row * &tau)[0] - rho[h]
        });
        let tn = tau.norm();
        PetrovSolution {
            tau: tau.as_slice().to_vec(),
            residual,
            iterations,
            branch,
            bound_k: st.k,
            m_estimate: st.m_est,
            b_o: st.b_o.as_slice().to_vec(),
            rho_sup,
            bound_ok: tn <= st.k * rho_sup * (1.0 + 1e-9) + 1e-15,
            delta: st.delta,
            slack,
            clipped_steps: clipped,
            violation: st.violation.clone(),
        }
    };
    let e0 = evaluate(p, &st, &zero, boundary.as_ref());
    if e0.residual <= p.tol {
        return Ok(mk(zero, e0.residual, 0, PetrovBranch::Trivial, rho_sup, 0));
    }
    let mut tau = zero;
    let mut best = (tau.clone(), f64::INFINITY);
    let mut damping = 1.0;
    let mut since_best = 0;
    let mut clipped = 0;
    let mut iters = 0;
    while iters < p.max_iters {
        let e = evaluate(p, &st, &tau, boundary.as_ref());
        rho_sup = rho_sup.max(e.rho_norm);
        if e.residual < best.1 {
            best = (tau.clone(), e.residual);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if e.residual <= p.tol {
            let branch = if damping < 1.0 { PetrovBranch::DampedFixedPoint } else { PetrovBranch::FixedPoint };
            return Ok(mk(tau, e.residual, iters, branch, rho_sup, clipped));
        }
        if since_best >= STALL_WINDOW {
            damping *= 0.5;
            since_best = 0;
            tau = best.0.clone();
            if damping < 1e-6 {
                break;
            }
            continue;
        }
        let mut next = &tau + (&e.phi - &tau) * damping;
        if clip(&mut next, radius) {
            clipped += 1;
        }
        tau = next;
        iters += 1;
    }
    let (tau, r, evals) = pattern_search(p, &st, &best.0, boundary.as_ref(), 100_000);
    let r_final = evaluate(p, &st, &tau, boundary.as_ref());
    rho_sup = rho_sup.max(r_final.rho_norm);
    if r <= p.tol {
        return Ok(mk(tau, r, iters + evals, PetrovBranch::PatternSearch, rho_sup, clipped));
    }
    Err(PetrovError::NoConvergence(iters + evals))
}

/// Solves the interior equation.
pub fn solve(problem: &PetrovProblem) -> Result<PetrovSolution, PetrovError> {
    if problem.s.is_some() {
        return solve_boundary(problem);
    }
    run(problem, None)
}

/// Solves the boundary equation `(Ã_o+γ(τ))τ = ρ(τ) + h e_{h+1}` with `h ≥ 0`.
pub fn solve_boundary(problem: &PetrovProblem) -> Result<PetrovSolution, PetrovError> {
    let s = problem
        .s
        .as_ref()
        .ok_or_else(|| PetrovError::BudgetExceeded("boundary solve without an s row".into()))?;
    let cert = check_boundary(&problem.a_o, s)?;
    if !cert.verdict {
        return Err(PetrovError::BudgetExceeded("boundary spanning condition fails for (A_o; s)".into()));
    }
    let mu = DVector::from_vec(cert.mu.expect("witness accompanies a true verdict"));
    run(problem, Some(mu))
}
