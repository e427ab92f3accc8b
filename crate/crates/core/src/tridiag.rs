//! Thomas algorithm for tridiagonal systems.

use crate::error::{SolverError, SolverResult};
use crate::scalar::{lit, Real};

/// Relative pivot threshold: a pivot below `PIVOT_TOL * max|diag|` is zero.
pub const PIVOT_TOL: f64 = 1e-14;

/// Banded system `A x = rhs` of order `n`.
///
/// Row `i` reads `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem<T> {
    /// Sub-diagonal, `n - 1` entries.
    pub lower: Vec<T>,
    /// Main diagonal, `n` entries.
    pub diag: Vec<T>,
    /// Super-diagonal, `n - 1` entries.
    pub upper: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> TridiagonalSystem<T> {
    pub fn new(lower: Vec<T>, diag: Vec<T>, upper: Vec<T>, rhs: Vec<T>) -> SolverResult<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(SolverError::InvalidGrid("empty tridiagonal system".into()));
        }
        if lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
            return Err(SolverError::InvalidGrid(format!(
                "band lengths ({}, {}, {}, rhs {}) do not match order {n}",
                lower.len(),
                diag.len(),
                upper.len(),
                rhs.len()
            )));
        }
        let finite = lower
            .iter()
            .chain(&diag)
            .chain(&upper)
            .chain(&rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(SolverError::NonFinite("tridiagonal coefficients".into()));
        }
        Ok(TridiagonalSystem {
            lower,
            diag,
            upper,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        tridiagonal_apply(&self.lower, &self.diag, &self.upper, x)
    }

    pub fn solve(&self) -> SolverResult<Vec<T>> {
        thomas_solve(self)
    }
}

pub fn thomas_solve<T: Real>(sys: &TridiagonalSystem<T>) -> SolverResult<Vec<T>> {
    solve_tridiagonal(&sys.lower, &sys.diag, &sys.upper, &sys.rhs)
}

/// Thomas elimination without pivoting.
///
/// Fails with [`SolverError::ZeroPivot`] when a pivot drops below
/// `1e-14 * max|diag|`.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> SolverResult<Vec<T>> {
    let n = diag.len();
    debug_assert!(n >= 1 && lower.len() + 1 == n && upper.len() + 1 == n && rhs.len() == n);
    let scale = diag.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let threshold = lit::<T>(PIVOT_TOL) * scale;

    let mut c_star = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];

    let mut pivot = diag[0];
    if !(pivot.abs() > threshold) {
        return Err(SolverError::ZeroPivot { index: 0 });
    }
    if n > 1 {
        c_star[0] = upper[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c_star[i - 1];
        if !(pivot.abs() > threshold) {
            return Err(SolverError::ZeroPivot { index: i });
        }
        if i + 1 < n {
            c_star[i] = upper[i] / pivot;
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_star[i] * next;
    }
    Ok(x)
}

pub(crate) fn tridiagonal_apply<T: Real>(lower: &[T], diag: &[T], upper: &[T], x: &[T]) -> Vec<T> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut acc = diag[i] * x[i];
            if i > 0 {
                acc += lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += upper[i] * x[i + 1];
            }
            acc
        })
        .collect()
}
