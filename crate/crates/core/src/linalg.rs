//! Tridiagonal factorization and small numeric helpers.
//!
//! Diagonals follow the usual convention: for an `n x n` matrix `A`,
//! `lower[i] = A[i+1][i]`, `main[i] = A[i][i]` and `upper[i] = A[i][i+1]`.

use crate::error::check_len;
use crate::{Error, Result};

/// Pivots smaller than this fraction of their row's absolute sum make the
/// no-pivot sweep hand over to partial pivoting.
const RELATIVE_PIVOT_FLOOR: f64 = 1e-12;

/// Neumaier-compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `y = A x` for a tridiagonal `A`.
pub fn tridiagonal_matvec(lower: &[f64], main: &[f64], upper: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let n = main.len();
    check_diagonals(lower, main, upper)?;
    check_len(n, x.len())?;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = main[i] * x[i];
        if i > 0 {
            acc += lower[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            acc += upper[i] * x[i + 1];
        }
        y[i] = acc;
    }
    Ok(y)
}

fn check_diagonals(lower: &[f64], main: &[f64], upper: &[f64]) -> Result<()> {
    let n = main.len();
    if n == 0 {
        return Err(Error::Dimension { expected: 1, actual: 0 });
    }
    check_len(n - 1, lower.len())?;
    check_len(n - 1, upper.len())
}

/// LU factorization of a tridiagonal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub enum TridiagonalFactor {
    /// Elimination without row exchanges.
    Thomas { multipliers: Vec<f64>, pivots: Vec<f64>, upper: Vec<f64> },
    /// Partial pivoting; fill-in creates a second superdiagonal.
    Pivoted {
        multipliers: Vec<f64>,
        diag: Vec<f64>,
        upper1: Vec<f64>,
        upper2: Vec<f64>,
        swapped: Vec<bool>,
    },
}

impl TridiagonalFactor {
    /// Factors the matrix, preferring the Thomas sweep and falling back to
    /// partial pivoting when a pivot drops below the relative floor.
    pub fn new(lower: &[f64], main: &[f64], upper: &[f64]) -> Result<Self> {
        check_diagonals(lower, main, upper)?;
        if lower.iter().chain(main).chain(upper).any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite matrix entry".into()));
        }
        match Self::thomas(lower, main, upper) {
            Some(f) => Ok(f),
            None => Self::pivoted(lower, main, upper),
        }
    }

    fn thomas(lower: &[f64], main: &[f64], upper: &[f64]) -> Option<Self> {
        let n = main.len();
        let mut pivots = vec![0.0; n];
        let mut multipliers = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut pivot = main[i];
            if i > 0 {
                let m = lower[i - 1] / pivots[i - 1];
                multipliers[i - 1] = m;
                pivot -= m * upper[i - 1];
            }
            let mut scale = main[i].abs();
            if i > 0 {
                scale += lower[i - 1].abs();
            }
            if i + 1 < n {
                scale += upper[i].abs();
            }
            if !(pivot.abs() > RELATIVE_PIVOT_FLOOR * scale) || !pivot.is_finite() {
                return None;
            }
            pivots[i] = pivot;
        }
        Some(TridiagonalFactor::Thomas { multipliers, pivots, upper: upper.to_vec() })
    }

    fn pivoted(lower: &[f64], main: &[f64], upper: &[f64]) -> Result<Self> {
        let n = main.len();
        let mut dl = lower.to_vec();
        let mut d = main.to_vec();
        let mut du = upper.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|v| !v.is_normal()) {
            return Err(Error::LinearSolve(format!(
                "zero or subnormal pivot {:e} in row {i} after partial pivoting",
                d[i]
            )));
        }
        Ok(TridiagonalFactor::Pivoted { multipliers: dl, diag: d, upper1: du, upper2: du2, swapped })
    }

    pub fn is_pivoted(&self) -> bool {
        matches!(self, TridiagonalFactor::Pivoted { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            TridiagonalFactor::Thomas { pivots, .. } => pivots.len(),
            TridiagonalFactor::Pivoted { diag, .. } => diag.len(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_len(self.dim(), x.len())?;
        let n = x.len();
        match self {
            TridiagonalFactor::Thomas { multipliers, pivots, upper } => {
                for i in 1..n {
                    x[i] -= multipliers[i - 1] * x[i - 1];
                }
                x[n - 1] /= pivots[n - 1];
                for i in (0..n - 1).rev() {
                    x[i] = (x[i] - upper[i] * x[i + 1]) / pivots[i];
                }
            }
            TridiagonalFactor::Pivoted { multipliers, diag, upper1, upper2, swapped } => {
                for i in 0..n - 1 {
                    if swapped[i] {
                        let temp = x[i] - multipliers[i] * x[i + 1];
                        x[i] = x[i + 1];
                        x[i + 1] = temp;
                    } else {
                        x[i + 1] -= multipliers[i] * x[i];
                    }
                }
                x[n - 1] /= diag[n - 1];
                if n > 1 {
                    x[n - 2] = (x[n - 2] - upper1[n - 2] * x[n - 1]) / diag[n - 2];
                }
                for i in (0..n.saturating_sub(2)).rev() {
                    x[i] = (x[i] - upper1[i] * x[i + 1] - upper2[i] * x[i + 2]) / diag[i];
                }
            }
        }
        Ok(())
    }
}

/// One-shot solve of a tridiagonal system.
pub fn solve_tridiagonal(lower: &[f64], main: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    check_len(main.len(), rhs.len())?;
    TridiagonalFactor::new(lower, main, upper)?.solve(rhs)
}
