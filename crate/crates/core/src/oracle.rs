//! Closed-form reference for the constant-exponent (GBM) case.
//!
//! With `p = q ≡ 1` and constant `V = v`, the process is geometric Brownian
//! motion with terminal law `X_T = x·exp((μ − σ²/2)T + σ√T·Z)`, so
//! `u(x, T) = e^{−vT} ∫ f(X_T(z)) φ(z) dz`. The integral is evaluated by
//! composite Simpson quadrature on `[−12, 12]`, refined until two successive
//! levels agree. Nothing here touches the PDE or Monte Carlo code paths.

use crate::error::{Error, Result};
use crate::exponent::ExponentKind;
use crate::model::ModelSpec;

const Z_RANGE: f64 = 12.0;
const MAX_REFINEMENTS: usize = 12;

#[derive(Debug, Clone)]
pub struct GbmOracle<'a> {
    spec: &'a ModelSpec,
    discount: f64,
}

impl<'a> GbmOracle<'a> {
    /// Accepts only specs with `p ≡ q ≡ 1` and a constant potential.
    pub fn new(spec: &'a ModelSpec) -> Result<Self> {
        let is_one = |kind: &ExponentKind| matches!(kind, ExponentKind::Constant(c) if *c == 1.0);
        if !is_one(spec.p.kind()) || !is_one(spec.q.kind()) {
            return Err(Error::Config("GBM oracle needs p = q = 1".into()));
        }
        let v = spec
            .potential
            .as_constant()
            .ok_or_else(|| Error::Config("GBM oracle needs a constant potential".into()))?;
        Ok(Self {
            spec,
            discount: (-v * spec.horizon).exp(),
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        let s = self.spec;
        let drift = (s.mu - 0.5 * s.sigma * s.sigma) * s.horizon;
        let vol = s.sigma * s.horizon.sqrt();
        let integrand = |z: f64| {
            let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            s.payoff.eval(x * (drift + vol * z).exp()) * phi
        };
        self.discount * refine(integrand)
    }

    pub fn values(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }
}

fn simpson(f: &impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 2.0 * Z_RANGE / n as f64;
    let mut sum = f(-Z_RANGE) + f(Z_RANGE);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(-Z_RANGE + h * i as f64);
    }
    sum * h / 3.0
}

fn refine(f: impl Fn(f64) -> f64) -> f64 {
    let mut n = 256;
    let mut prev = simpson(&f, n);
    for _ in 0..MAX_REFINEMENTS {
        n *= 2;
        let next = simpson(&f, n);
        if (next - prev).abs() <= 1e-15 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::CaseId;
    use crate::model::ScalarFn;

    #[test]
    fn matches_lognormal_moments() {
        // f(x) = x gives x·e^{μT}; f(x) = x² gives x²e^{(2μ+σ²)T}.
        let mut s = ModelSpec::reference(CaseId::Case3);
        s.potential = ScalarFn::constant(0.0);
        s.payoff = ScalarFn::new("x", |x| x);
        let o = GbmOracle::new(&s).unwrap();
        assert!((o.value(2.0) - 2.0 * 0.1f64.exp()).abs() < 1e-13);
        s.payoff = ScalarFn::new("x^2", |x| x * x);
        let o = GbmOracle::new(&s).unwrap();
        assert!((o.value(1.5) - 2.25 * (0.2f64 + 0.04).exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_payoff_is_pure_discount() {
        let mut s = ModelSpec::reference(CaseId::Case3);
        s.payoff = ScalarFn::constant(1.0);
        let o = GbmOracle::new(&s).unwrap();
        assert!((o.value(7.0) - (-0.1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_variable_exponents() {
        assert!(GbmOracle::new(&ModelSpec::reference(CaseId::Case1)).is_err());
        let mut s = ModelSpec::reference(CaseId::Case3);
        s.potential = ScalarFn::new("x", |x| x);
        assert!(GbmOracle::new(&s).is_err());
    }
}
