//! Dense two-phase simplex for small linear programs.
//!
//! Standard form: minimise `c·x` subject to `A x = b`, `x ≥ 0`. Pivoting
//! follows Bland's rule so the method terminates on degenerate problems.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Pivot and feasibility tolerance.
pub const LP_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// Rows `0..m` are constraints `[A | b]`; row `m` holds reduced costs and `-z`.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows() - 1
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(LpError::NumericalBreakdown(format!("more than {MAX_PIVOTS} pivots")));
        }
        let p = self.t[(r, c)];
        if p.abs() < 1e-14 {
            return Err(LpError::NumericalBreakdown("vanishing pivot".into()));
        }
        let row = self.t.row(r) / p;
        self.t.set_row(r, &row);
        for i in 0..self.t.nrows() {
            if i != r {
                let f = self.t[(i, c)];
                if f != 0.0 {
                    let upd = self.t.row(i) - row.clone() * f;
                    self.t.set_row(i, &upd);
                }
            }
        }
        self.basis[r] = c;
        Ok(())
    }

    /// Runs simplex iterations over the columns in `allowed`. Returns false when unbounded.
    fn optimise(&mut self, allowed: usize) -> Result<bool, LpError> {
        let m = self.rows();
        let rhs = self.rhs_col();
        loop {
            let entering = (0..allowed).find(|&j| self.t[(m, j)] < -LP_TOL);
            let Some(c) = entering else { return Ok(true) };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.t[(i, c)];
                if a > LP_TOL {
                    let ratio = self.t[(i, rhs)] / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => {
                            ratio < br - LP_TOL || ((ratio - br).abs() <= LP_TOL && self.basis[i] < bb)
                        }
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((_, r, _)) => self.pivot(r, c)?,
            }
        }
    }
}

/// Minimises `c·x` over `{A x = b, x ≥ 0}`.
pub fn simplex(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpOutcome, LpError> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(LpError::DimensionMismatch(format!(
            "A is {m}x{n}, b has {} entries, c has {}",
            b.len(),
            c.len()
        )));
    }
    // Columns: n originals, m artificials, rhs.
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = sign * b[i];
    }
    // Phase one objective: sum of artificials, expressed in the non-basic columns.
    for i in 0..m {
        for j in 0..n {
            t[(m, j)] -= t[(i, j)];
        }
        t[(m, n + m)] -= t[(i, n + m)];
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), pivots: 0 };
    tab.optimise(n + m)?;
    let scale = 1.0 + b.amax();
    if -tab.t[(m, n + m)] > LP_TOL * scale {
        return Ok(LpOutcome::Infeasible);
    }
    // Drive artificials out of the basis; rows that cannot be pivoted are redundant.
    let mut redundant = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.t[(r, j)].abs() > LP_TOL) {
                Some(j) => tab.pivot(r, j)?,
                None => redundant.push(r),
            }
        }
    }
    let keep: Vec<usize> = (0..m).filter(|r| !redundant.contains(r)).collect();
    let mut t2 = DMatrix::zeros(keep.len() + 1, n + 1);
    let mut basis = Vec::with_capacity(keep.len());
    for (k, &r) in keep.iter().enumerate() {
        for j in 0..n {
            t2[(k, j)] = tab.t[(r, j)];
        }
        t2[(k, n)] = tab.t[(r, n + m)];
        basis.push(tab.basis[r]);
    }
    let mk = keep.len();
    for j in 0..n {
        t2[(mk, j)] = c[j];
    }
    for (k, &bj) in basis.iter().enumerate() {
        let cb = c[bj];
        if cb != 0.0 {
            for j in 0..=n {
                t2[(mk, j)] -= cb * t2[(k, j)];
            }
        }
    }
    let mut tab = Tableau { t: t2, basis, pivots: tab.pivots };
    if !tab.optimise(n)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = DVector::zeros(n);
    for (k, &bj) in tab.basis.iter().enumerate() {
        x[bj] = tab.t[(k, n)].max(0.0);
    }
    let value = c.dot(&x);
    Ok(LpOutcome::Optimal { x, value })
}

/// Finds a vertex `x ≥ lower` with `A x = b`, or `None` when the system is infeasible.
pub fn lp_feasible(a: &DMatrix<f64>, b: &DVector<f64>, lower: &[f64]) -> Result<Option<DVector<f64>>, LpError> {
    let n = a.ncols();
    if lower.len() != n {
        return Err(LpError::DimensionMismatch(format!("{} bounds for {n} variables", lower.len())));
    }
    let lo = DVector::from_column_slice(lower);
    let shifted = b - a * &lo;
    match simplex(a, &shifted, &DVector::zeros(n))? {
        LpOutcome::Optimal { x, .. } => Ok(Some(x + lo)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(LpError::NumericalBreakdown("unbounded feasibility problem".into())),
    }
}
