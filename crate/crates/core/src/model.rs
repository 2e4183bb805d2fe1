//! Problem data shared by the PDE and Monte Carlo solvers.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exponent::{builtin_case, CaseId, ExponentFunction};
use crate::expr::Expr;

/// Scalar function of the state, for the potential `V` and payoff `f`.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constant: Option<f64>,
}

impl ScalarFn {
    pub fn constant(c: f64) -> Self {
        Self {
            label: format!("{c}"),
            func: Arc::new(move |_| c),
            constant: Some(c),
        }
    }

    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            func: Arc::new(f),
            constant: None,
        }
    }

    pub fn from_expr(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        if expr.is_constant() {
            let c = expr.eval(1.0);
            return Ok(Self {
                label: source.to_string(),
                func: Arc::new(move |_| c),
                constant: Some(c),
            });
        }
        Ok(Self::new(source, move |x| expr.eval(x)))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// The Cauchy problem `∂ₜu = ½σ²x^{2q(x)}∂²ₓu + μx^{p(x)}∂ₓu − V(x)u`,
/// `u(x, 0) = f(x)`, together with the SDE
/// `dX = μX^{p(X)}dt + σX^{q(X)}dW` it is paired with.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub mu: f64,
    pub sigma: f64,
    pub p: ExponentFunction,
    pub q: ExponentFunction,
    pub potential: ScalarFn,
    pub payoff: ScalarFn,
    pub horizon: f64,
    /// Truncation interval `(r, R)` for the PDE grid and MC start points.
    pub domain: (f64, f64),
}

impl ModelSpec {
    /// Physical parameters of the reference experiments: μ = 0.1, σ = 0.2,
    /// V ≡ 0.1, f(x) = e^(−0.1x), T = 1, domain [0.1, 50].
    pub fn reference(case: CaseId) -> Self {
        let (p, q) = builtin_case(case);
        Self {
            mu: 0.1,
            sigma: 0.2,
            p,
            q,
            potential: ScalarFn::constant(0.1),
            payoff: ScalarFn::new("exp(-0.1*x)", |x| (-0.1 * x).exp()),
            horizon: 1.0,
            domain: (0.1, 50.0),
        }
    }

    /// Parameter sanity. μ = 0 and σ = 0 are accepted for degenerate
    /// (deterministic or driftless) test problems.
    pub fn validate(&self) -> Result<()> {
        let (r, big_r) = self.domain;
        let checks = [
            (
                self.mu.is_finite() && self.mu >= 0.0,
                "mu must be finite and >= 0",
            ),
            (
                self.sigma.is_finite() && self.sigma >= 0.0,
                "sigma must be finite and >= 0",
            ),
            (
                self.horizon.is_finite() && self.horizon > 0.0,
                "horizon T must be > 0",
            ),
            (
                r.is_finite() && big_r.is_finite() && 0.0 < r && r < big_r,
                "domain needs 0 < r < R",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.to_string()));
            }
        }
        Ok(())
    }

    /// `V(x)`, rejecting negative or non-finite values.
    #[inline]
    pub fn potential_at(&self, x: f64) -> Result<f64> {
        let v = self.potential.eval(x);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidFunction {
                name: format!("V = {}", self.potential.label()),
                x,
                value: v,
            })
        }
    }

    pub fn payoff_at(&self, x: f64) -> Result<f64> {
        let v = self.payoff.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidFunction {
                name: format!("f = {}", self.payoff.label()),
                x,
                value: v,
            })
        }
    }
}
