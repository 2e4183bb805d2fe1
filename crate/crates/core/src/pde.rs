//! Crank–Nicolson solver for the log-transformed problem
//!
//! ```text
//! ∂ₜv = A(y)∂²ᵧv + B(y)∂ᵧv − C(y)v,   v(y, 0) = f(eʸ),
//! A(y) = ½σ² e^{y(2q(eʸ)−2)},  B(y) = μ e^{y(p(eʸ)−1)} − A(y),  C(y) = V(eʸ),
//! ```
//!
//! on a uniform grid over `[log r, log R]` with homogeneous Neumann conditions
//! imposed by mirrored ghost nodes (`v₋₁ = v₁`, `v_N = v_{N−2}`).

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::tridiag::{ThomasSolver, Tridiagonal};

#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    pub y_min: f64,
    pub y_max: f64,
    pub dy: f64,
    pub nodes_y: Vec<f64>,
    pub nodes_x: Vec<f64>,
}

impl LogGrid {
    /// `n_x` nodes (not intervals) spanning `[log r, log R]`.
    pub fn new(r: f64, big_r: f64, n_x: usize) -> Result<Self> {
        if !(r > 0.0 && big_r > r && big_r.is_finite()) {
            return Err(Error::Config(format!(
                "grid needs 0 < r < R, got [{r}, {big_r}]"
            )));
        }
        if n_x < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3 nodes, got {n_x}"
            )));
        }
        let (y_min, y_max) = (r.ln(), big_r.ln());
        let dy = (y_max - y_min) / (n_x - 1) as f64;
        let nodes_y: Vec<f64> = (0..n_x)
            .map(|i| {
                if i == n_x - 1 {
                    y_max
                } else {
                    y_min + dy * i as f64
                }
            })
            .collect();
        let nodes_x = nodes_y.iter().map(|y| y.exp()).collect();
        Ok(Self {
            y_min,
            y_max,
            dy,
            nodes_y,
            nodes_x,
        })
    }

    pub fn for_spec(spec: &ModelSpec, n_x: usize) -> Result<Self> {
        Self::new(spec.domain.0, spec.domain.1, n_x)
    }

    pub fn len(&self) -> usize {
        self.nodes_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes_y.is_empty()
    }
}

/// Per-node coefficients of the transformed equation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

pub fn build_coefficients(spec: &ModelSpec, grid: &LogGrid) -> Result<TransformedCoefficients> {
    spec.validate()?;
    let n = grid.len();
    let (mut a, mut b, mut c) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for (i, (&y, &x)) in grid.nodes_y.iter().zip(&grid.nodes_x).enumerate() {
        let ai =
            0.5 * spec.sigma * spec.sigma * (y * (2.0 * spec.q.eval_with_ln(x, y) - 2.0)).exp();
        let bi = spec.mu * (y * (spec.p.eval_with_ln(x, y) - 1.0)).exp() - ai;
        let ci = spec.potential.eval(x);
        for (which, value) in [("A", ai), ("B", bi), ("C", ci)] {
            if !value.is_finite() {
                return Err(Error::Coefficient {
                    node: i,
                    which,
                    value,
                });
            }
        }
        if ai < 0.0 {
            return Err(Error::Coefficient {
                node: i,
                which: "A",
                value: ai,
            });
        }
        if ci < 0.0 {
            return Err(Error::Coefficient {
                node: i,
                which: "C",
                value: ci,
            });
        }
        a.push(ai);
        b.push(bi);
        c.push(ci);
    }
    Ok(TransformedCoefficients { a, b, c })
}

/// The semi-discrete operator `L` (central differences, ghost rows folded in).
pub fn operator_matrix(coeffs: &TransformedCoefficients, dy: f64) -> Tridiagonal {
    let n = coeffs.a.len();
    let (inv_dy2, inv_2dy) = (1.0 / (dy * dy), 0.5 / dy);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let (a, b, c) = (coeffs.a[i], coeffs.b[i], coeffs.c[i]);
        let lo = a * inv_dy2 - b * inv_2dy;
        let up = a * inv_dy2 + b * inv_2dy;
        diag[i] = -2.0 * a * inv_dy2 - c;
        if i == 0 {
            // v₋₁ = v₁
            upper[i] = lo + up;
        } else if i == n - 1 {
            // v_N = v_{N−2}
            lower[i] = lo + up;
        } else {
            lower[i] = lo;
            upper[i] = up;
        }
    }
    Tridiagonal { lower, diag, upper }
}

/// Matrix pair `(I − ½Δt L, I + ½Δt L)` with a reusable solver.
#[derive(Debug, Clone)]
pub struct CnStepper {
    implicit: Tridiagonal,
    explicit: Tridiagonal,
    solver: ThomasSolver,
    rhs: Vec<f64>,
}

impl CnStepper {
    pub fn new(coeffs: &TransformedCoefficients, dy: f64, dt: f64) -> Result<Self> {
        if !(dy > 0.0 && dt > 0.0) {
            return Err(Error::Config(format!(
                "need dy > 0 and dt > 0, got {dy}, {dt}"
            )));
        }
        let l = operator_matrix(coeffs, dy);
        let h = 0.5 * dt;
        let scaled = |m: f64, d: &[f64]| d.iter().map(|v| m * h * v).collect::<Vec<_>>();
        let implicit = Tridiagonal {
            lower: scaled(-1.0, &l.lower),
            diag: l.diag.iter().map(|d| 1.0 - h * d).collect(),
            upper: scaled(-1.0, &l.upper),
        };
        let explicit = Tridiagonal {
            lower: scaled(1.0, &l.lower),
            diag: l.diag.iter().map(|d| 1.0 + h * d).collect(),
            upper: scaled(1.0, &l.upper),
        };
        if let Some(node) = implicit.dominance_violation() {
            return Err(Error::DiagonalDominance { node });
        }
        let n = l.len();
        Ok(Self {
            implicit,
            explicit,
            solver: ThomasSolver::new(n),
            rhs: vec![0.0; n],
        })
    }

    pub fn implicit(&self) -> &Tridiagonal {
        &self.implicit
    }

    pub fn explicit(&self) -> &Tridiagonal {
        &self.explicit
    }

    /// Advance `v` by one step in place.
    pub fn step(&mut self, v: &mut [f64]) -> Result<()> {
        self.explicit.apply(v, &mut self.rhs);
        self.solver.solve(&self.implicit, &self.rhs, v)
    }
}

/// One Crank–Nicolson step `(I − ½ΔtL)v⁺ = (I + ½ΔtL)v`.
pub fn cn_step(coeffs: &TransformedCoefficients, v: &[f64], dy: f64, dt: f64) -> Result<Vec<f64>> {
    if v.len() != coeffs.a.len() {
        return Err(Error::Config(format!(
            "state has {} entries, coefficients {}",
            v.len(),
            coeffs.a.len()
        )));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Config(format!("non-finite state at node {i}")));
    }
    let mut out = v.to_vec();
    CnStepper::new(coeffs, dy, dt)?.step(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    /// Keep every `k`-th time slice; 0 keeps only the initial and final ones.
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub grid: LogGrid,
    pub n_t: usize,
    pub dt: f64,
    /// Time of each stored slice, increasing, first 0 and last T.
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Extremes over every node and every time step, stored or not.
    pub min_value: f64,
    pub max_value: f64,
}

impl GridSolution {
    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0]
    }

    /// `u(x_i, T)` at every node.
    pub fn final_values(&self) -> &[f64] {
        self.snapshots.last().expect("at least two snapshots")
    }

    /// `max |v(·, t_k)| ≤ max |v(·, 0)| + tol` for every step.
    pub fn max_principle_holds(&self, tol: f64) -> bool {
        let bound = self.initial().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.max_value.abs().max(self.min_value.abs()) <= bound + tol
    }
}

pub fn solve_pde(
    spec: &ModelSpec,
    grid: &LogGrid,
    n_t: usize,
    options: &SolveOptions,
) -> Result<GridSolution> {
    if n_t == 0 {
        return Err(Error::Config("n_t must be at least 1".into()));
    }
    let coeffs = build_coefficients(spec, grid)?;
    let dt = spec.horizon / n_t as f64;
    let mut stepper = CnStepper::new(&coeffs, grid.dy, dt)?;

    let mut v = Vec::with_capacity(grid.len());
    for &x in &grid.nodes_x {
        v.push(spec.payoff_at(x)?);
    }
    let extremes = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    };
    let (mut min_value, mut max_value) = extremes(&v);
    let mut times = vec![0.0];
    let mut snapshots = vec![v.clone()];

    for k in 1..=n_t {
        stepper.step(&mut v)?;
        let (lo, hi) = extremes(&v);
        min_value = min_value.min(lo);
        max_value = max_value.max(hi);
        let keep = k == n_t || (options.snapshot_stride > 0 && k % options.snapshot_stride == 0);
        if keep {
            times.push(if k == n_t {
                spec.horizon
            } else {
                k as f64 * dt
            });
            snapshots.push(v.clone());
        }
    }

    Ok(GridSolution {
        grid: grid.clone(),
        n_t,
        dt,
        times,
        snapshots,
        min_value,
        max_value,
    })
}
