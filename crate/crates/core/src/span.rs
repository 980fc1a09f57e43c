//! Positive-basis tests and the boundary variant of the spanning condition.
//!
//! A set of columns `A = (a_1..a_m)` in `R^h` is a positive basis when its
//! nonnegative combinations cover `R^h`. Equivalently `rank A = h` and some
//! strictly positive `λ` satisfies `Aλ = 0`; the certificate carries that `λ`.
//!
//! The boundary condition asks, for the stacked matrix `Â = (A; s)`, that
//! `rank Â = h + 1` and that every `p ∈ R^h`, `r ≥ 0` admits `λ ≥ 0` with
//! `Aλ = p`, `s·λ ≥ r`. This is checked as three finite conditions: the rank,
//! `A` being a positive basis, and some `μ ≥ 0` with `Aμ = 0`, `s·μ = 1`.
//! Given these, `λ = λ_p + cμ` with `λ_p ≥ 0`, `Aλ_p = p` and `c` large
//! works for any `(p, r)`. Conversely `(p, r) = (0, 1)` yields `μ` and
//! `r = 0` with arbitrary `p` yields positive spanning.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{lp_feasible, simplex, LpError, LpOutcome};

/// Margin required of the positive null combination.
pub const MARGIN_TOL: f64 = 1e-9;
/// Relative threshold on pivots when computing rank.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpanError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCertificate {
    pub verdict: bool,
    /// Rank of `A`.
    pub rank: usize,
    /// Rank of `Â` for boundary checks.
    pub boundary_rank: Option<usize>,
    /// Optimal `t` of `max t s.t. Aλ = 0, λ_i ≥ t, Σλ = 1`.
    pub margin: f64,
    /// Null combination normalised to `Σλ = 1`; present when `margin > 0`.
    pub lambda: Option<Vec<f64>>,
    /// Boundary witness: `μ ≥ 0`, `Aμ = 0`, `s·μ = 1`.
    pub mu: Option<Vec<f64>>,
    /// `‖Aλ‖` (and `‖Âμ − e‖` when a boundary witness exists).
    pub residual: f64,
}

/// Column-pivoted Householder QR with norm pivoting.
/// Returns the column order and the absolute diagonal of `R`.
pub fn pivoted_qr(a: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let (h, m) = a.shape();
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut diag = Vec::with_capacity(h.min(m));
    for k in 0..h.min(m) {
        let (best, _) = (k..m)
            .map(|j| (j, w.view((k, j), (h - k, 1)).norm_squared()))
            .fold((k, -1.0), |acc, (j, n)| if n > acc.1 { (j, n) } else { acc });
        w.swap_columns(k, best);
        perm.swap(k, best);
        let x = w.view((k, k), (h - k, 1)).clone_owned();
        let alpha = x.norm();
        diag.push(alpha);
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vn = v.norm_squared();
        if vn == 0.0 {
            continue;
        }
        for j in k..m {
            let col = w.view((k, j), (h - k, 1)).clone_owned();
            let f = 2.0 * v.dot(&col) / vn;
            let upd = col - &v * f;
            w.view_mut((k, j), (h - k, 1)).copy_from(&upd);
        }
    }
    (perm, diag)
}

/// Numerical rank with threshold `RANK_TOL · ‖A‖_F`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let norm = a.norm();
    if norm == 0.0 {
        return 0;
    }
    let (_, diag) = pivoted_qr(a);
    diag.iter().filter(|&&d| d > RANK_TOL * norm).count()
}

fn check_columns(a: &DMatrix<f64>) -> Result<(), SpanError> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Err(SpanError::DegenerateInput("empty matrix".into()));
    }
    let norm = a.norm();
    for (j, c) in a.column_iter().enumerate() {
        if c.norm() <= 1e-12 * norm || c.norm() == 0.0 {
            return Err(SpanError::DegenerateInput(format!("column {j} is zero")));
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(SpanError::DegenerateInput("non-finite entry".into()));
    }
    Ok(())
}

/// Maximal margin `t` and the corresponding `λ`, or `None` when `Aλ = 0, Σλ = 1` has no solution.
fn max_margin(a: &DMatrix<f64>) -> Result<Option<(f64, DVector<f64>)>, SpanError> {
    let (h, m) = a.shape();
    // Variables (μ, t⁺, t⁻) with λ = μ + t·1.
    let row_sums: DVector<f64> = a.column_sum();
    let mut lp = DMatrix::zeros(h + 1, m + 2);
    lp.view_mut((0, 0), (h, m)).copy_from(a);
    for i in 0..h {
        lp[(i, m)] = row_sums[i];
        lp[(i, m + 1)] = -row_sums[i];
    }
    for j in 0..m {
        lp[(h, j)] = 1.0;
    }
    lp[(h, m)] = m as f64;
    lp[(h, m + 1)] = -(m as f64);
    let mut b = DVector::zeros(h + 1);
    b[h] = 1.0;
    let mut c = DVector::zeros(m + 2);
    c[m] = -1.0;
    c[m + 1] = 1.0;
    match simplex(&lp, &b, &c)? {
        LpOutcome::Optimal { x, .. } => {
            let t = x[m] - x[m + 1];
            let lambda = x.rows(0, m).map(|v| v + t);
            Ok(Some((t, lambda)))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(LpError::NumericalBreakdown("margin problem unbounded".into()).into()),
    }
}

/// Decides whether the columns of `A` form a positive basis of `R^h`.
pub fn is_positive_basis(a: &DMatrix<f64>) -> Result<SpanCertificate, SpanError> {
    check_columns(a)?;
    positive_basis_unchecked(a)
}

pub(crate) fn positive_basis_unchecked(a: &DMatrix<f64>) -> Result<SpanCertificate, SpanError> {
    let r = rank(a);
    let (margin, lambda) = match max_margin(a)? {
        Some((t, l)) => (t, Some(l)),
        None => (f64::NEG_INFINITY, None),
    };
    let residual = lambda.as_ref().map_or(0.0, |l| (a * l).norm());
    let verdict = margin > MARGIN_TOL && r == a.nrows();
    Ok(SpanCertificate {
        verdict,
        rank: r,
        boundary_rank: None,
        margin,
        lambda: lambda.filter(|_| margin > 0.0).map(|l| l.as_slice().to_vec()),
        mu: None,
        residual,
    })
}

/// Decides the boundary spanning condition for `Â = (A; s)`.
pub fn check_boundary(a: &DMatrix<f64>, s: &[f64]) -> Result<SpanCertificate, SpanError> {
    let (h, m) = a.shape();
    if s.len() != m {
        return Err(SpanError::DegenerateInput(format!("row s has {} entries for {m} columns", s.len())));
    }
    let mut hat = DMatrix::zeros(h + 1, m);
    hat.view_mut((0, 0), (h, m)).copy_from(a);
    for (j, v) in s.iter().enumerate() {
        hat[(h, j)] = *v;
    }
    check_columns(&hat)?;
    let hat_rank = rank(&hat);
    let mut cert = if h == 0 {
        // Nothing to span in the equality rows.
        SpanCertificate {
            verdict: true,
            rank: 0,
            boundary_rank: None,
            margin: f64::INFINITY,
            lambda: None,
            mu: None,
            residual: 0.0,
        }
    } else {
        // Columns of A may vanish as long as the stacked columns do not.
        positive_basis_unchecked(a)?
    };
    let mut rhs = DVector::zeros(h + 1);
    rhs[h] = 1.0;
    let mu = lp_feasible(&hat, &rhs, &vec![0.0; m])?;
    if let Some(mu) = &mu {
        cert.residual = cert.residual.max((&hat * mu - &rhs).norm());
    }
    cert.verdict = cert.verdict && hat_rank == h + 1 && mu.is_some();
    cert.boundary_rank = Some(hat_rank);
    cert.mu = mu.map(|v| v.as_slice().to_vec());
    Ok(cert)
}

/// `min λ_i / max λ_i` for a strictly positive witness.
pub fn eccentricity(lambda: &[f64]) -> Result<f64, SpanError> {
    if lambda.is_empty() || lambda.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return Err(SpanError::DegenerateInput("witness must be strictly positive".into()));
    }
    let lo = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambda.iter().copied().fold(0.0, f64::max);
    Ok(lo / hi)
}
