//! Tridiagonal systems and the Thomas sweep.

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are
/// unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// First row where `|diag| < |lower| + |upper|`, if any.
    pub fn dominance_violation(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.diag[i].abs() < self.lower[i].abs() + self.upper[i].abs())
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        debug_assert!(x.len() == n && y.len() == n);
        if n == 1 {
            y[0] = self.diag[0] * x[0];
            return;
        }
        y[0] = self.diag[0] * x[0] + self.upper[0] * x[1];
        for i in 1..n - 1 {
            y[i] = self.lower[i] * x[i - 1] + self.diag[i] * x[i] + self.upper[i] * x[i + 1];
        }
        y[n - 1] = self.lower[n - 1] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }
}

/// Reusable Thomas solver. No pivoting: a zero pivot is reported, never
/// perturbed away.
#[derive(Debug, Clone, Default)]
pub struct ThomasSolver {
    c_prime: Vec<f64>,
    d_prime: Vec<f64>,
}

impl ThomasSolver {
    pub fn new(n: usize) -> Self {
        Self {
            c_prime: vec![0.0; n],
            d_prime: vec![0.0; n],
        }
    }

    /// Solve `A x = rhs`, writing `x` into `out`.
    pub fn solve(&mut self, a: &Tridiagonal, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        let n = a.len();
        assert!(
            n > 0 && rhs.len() == n && out.len() == n,
            "dimension mismatch"
        );
        self.c_prime.resize(n, 0.0);
        self.d_prime.resize(n, 0.0);

        let mut pivot = a.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SolverSingular { node: 0 });
        }
        self.c_prime[0] = a.upper[0] / pivot;
        self.d_prime[0] = rhs[0] / pivot;
        #[allow(clippy::needless_range_loop)]
        for i in 1..n {
            pivot = a.diag[i] - a.lower[i] * self.c_prime[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SolverSingular { node: i });
            }
            self.c_prime[i] = if i + 1 < n { a.upper[i] / pivot } else { 0.0 };
            self.d_prime[i] = (rhs[i] - a.lower[i] * self.d_prime[i - 1]) / pivot;
        }
        out[n - 1] = self.d_prime[n - 1];
        for i in (0..n - 1).rev() {
            out[i] = self.d_prime[i] - self.c_prime[i] * out[i + 1];
        }
        Ok(())
    }
}
