//! Variable-exponent functions `h: (0, ∞) → [1, ∞)` and the class-S checks.
//!
//! A function belongs to class S when it is bounded in `[h⁻, h⁺]` with
//! `h⁻ ≥ 1` (h1), tends to 1 at infinity with `(h − 1)·log x` bounded (h2),
//! and has a derivative bounded by `M₀` near zero and by `C₀·x^(−1−α)` in the
//! tail, with `h⁺ < 1 + α` (h3).
//!
//! The constants are declared by the user in a [`ClassSCertificate`];
//! [`verify_class_s`] falsifies or accepts the certificate on a sampling grid.
//! It does not search for constants itself.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed forms used by the built-in cases, plus user-supplied variants.
#[derive(Clone)]
pub enum ExponentKind {
    /// `h(x) = c`
    Constant(f64),
    /// `h(x) = 1 + amplitude / (1 + x^power)`
    RationalDecay {
        amplitude: f64,
        power: f64,
    },
    /// `h(x) = 1 + amplitude · e^(−x)`
    ExponentialDecay {
        amplitude: f64,
    },
    /// Parsed expression with its symbolic derivative.
    Expression {
        value: Expr,
        derivative: Expr,
    },
    Custom {
        value: RealFn,
        derivative: RealFn,
    },
}

impl fmt::Debug for ExponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentKind::Constant(c) => write!(f, "Constant({c})"),
            ExponentKind::RationalDecay { amplitude, power } => {
                write!(
                    f,
                    "RationalDecay {{ amplitude: {amplitude}, power: {power} }}"
                )
            }
            ExponentKind::ExponentialDecay { amplitude } => {
                write!(f, "ExponentialDecay {{ amplitude: {amplitude} }}")
            }
            ExponentKind::Expression { value, .. } => write!(f, "Expression({value})"),
            ExponentKind::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// User-declared constants for hypotheses h1–h3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSCertificate {
    /// Claimed infimum of `h`, at least 1.
    pub h_minus: f64,
    /// Claimed supremum of `h`.
    pub h_plus: f64,
    /// Split point between the near-zero and tail derivative bounds, in (0, 1].
    pub delta: f64,
    /// Derivative bound on `(0, δ]`.
    pub m0: f64,
    /// Tail derivative constant.
    pub c0: f64,
    /// Tail derivative decay rate.
    pub alpha: f64,
    /// Bound on `(h(x) − 1)·log x` beyond `r_inf`.
    pub m_inf: f64,
    pub r_inf: f64,
}

impl ClassSCertificate {
    /// Structural sanity of the declared numbers. The h3 side condition
    /// `h⁺ < 1 + α` is a hypothesis, so it is checked by [`verify_class_s`]
    /// rather than here.
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidCertificate {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        let all = [
            self.h_minus,
            self.h_plus,
            self.delta,
            self.m0,
            self.c0,
            self.alpha,
            self.m_inf,
            self.r_inf,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all constants must be finite");
        }
        if self.h_minus < 1.0 {
            return bad("h_minus must be >= 1");
        }
        if self.h_minus > self.h_plus {
            return bad("h_minus must not exceed h_plus");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        if self.m0 <= 0.0 || self.c0 <= 0.0 || self.alpha <= 0.0 {
            return bad("m0, c0 and alpha must be positive");
        }
        // m_inf = 0 is allowed: it is the tight constant for h ≡ 1.
        if self.m_inf < 0.0 || self.r_inf <= 0.0 {
            return bad("m_inf must be >= 0 and r_inf > 0");
        }
        Ok(())
    }
}

/// A state-dependent exponent `h(x)` with its derivative.
///
/// Immutable once built; cheap to clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ExponentFunction {
    name: String,
    kind: ExponentKind,
    certificate: Option<ClassSCertificate>,
}

impl ExponentFunction {
    pub fn constant(c: f64) -> Self {
        Self::from_kind(format!("{c}"), ExponentKind::Constant(c))
    }

    pub fn rational_decay(amplitude: f64, power: f64) -> Self {
        Self::from_kind(
            format!("1 + {amplitude}/(1 + x^{power})"),
            ExponentKind::RationalDecay { amplitude, power },
        )
    }

    pub fn exponential_decay(amplitude: f64) -> Self {
        Self::from_kind(
            format!("1 + {amplitude}*exp(-x)"),
            ExponentKind::ExponentialDecay { amplitude },
        )
    }

    pub fn from_expr(source: &str) -> Result<Self> {
        let value = Expr::parse(source)?;
        let derivative = value.derivative();
        Ok(Self::from_kind(
            source.to_string(),
            ExponentKind::Expression { value, derivative },
        ))
    }

    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_kind(
            name.into(),
            ExponentKind::Custom {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
            },
        )
    }

    fn from_kind(name: String, kind: ExponentKind) -> Self {
        Self {
            name,
            kind,
            certificate: None,
        }
    }

    pub fn with_certificate(mut self, certificate: ClassSCertificate) -> Self {
        self.certificate = Some(certificate);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ExponentKind {
        &self.kind
    }

    pub fn certificate(&self) -> Option<&ClassSCertificate> {
        self.certificate.as_ref()
    }

    pub fn require_certificate(&self) -> Result<&ClassSCertificate> {
        self.certificate
            .as_ref()
            .ok_or_else(|| Error::CertificateRequired {
                name: self.name.clone(),
            })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_ln(x, x.ln())
    }

    /// `h(x)` given a precomputed `ln x`; the path simulator shares one
    /// logarithm between both exponents and both power terms.
    #[inline]
    pub fn eval_with_ln(&self, x: f64, ln_x: f64) -> f64 {
        match &self.kind {
            ExponentKind::Constant(c) => *c,
            ExponentKind::RationalDecay { amplitude, power } => {
                1.0 + amplitude / (1.0 + rpow(x, ln_x, *power))
            }
            ExponentKind::ExponentialDecay { amplitude } => 1.0 + amplitude * (-x).exp(),
            ExponentKind::Expression { value, .. } => value.eval(x),
            ExponentKind::Custom { value, .. } => value(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.kind {
            ExponentKind::Constant(_) => 0.0,
            ExponentKind::RationalDecay { amplitude, power } => {
                let xp = rpow(x, x.ln(), *power);
                -amplitude * power * xp / (x * (1.0 + xp) * (1.0 + xp))
            }
            ExponentKind::ExponentialDecay { amplitude } => -amplitude * (-x).exp(),
            ExponentKind::Expression { derivative, .. } => derivative.eval(x),
            ExponentKind::Custom { derivative, .. } => derivative(x),
        }
    }

    /// `x^{h(x)}` computed as `exp(h(x)·ln x)`, with the `h ≡ 1` case exact.
    #[inline]
    pub fn power_of(&self, x: f64, ln_x: f64) -> f64 {
        match self.kind {
            ExponentKind::Constant(1.0) => x,
            _ => (self.eval_with_ln(x, ln_x) * ln_x).exp(),
        }
    }

    /// Same as [`power_of`](Self::power_of) but for `x^{2h(x)}`.
    #[inline]
    pub fn double_power_of(&self, x: f64, ln_x: f64) -> f64 {
        match self.kind {
            ExponentKind::Constant(1.0) => x * x,
            _ => (2.0 * self.eval_with_ln(x, ln_x) * ln_x).exp(),
        }
    }
}

/// `x^a`, with small integer powers done by multiplication.
#[inline]
fn rpow(x: f64, ln_x: f64, a: f64) -> f64 {
    if a == a.trunc() && a.abs() <= 4.0 {
        x.powi(a as i32)
    } else {
        (a * ln_x).exp()
    }
}

/// The three exponent configurations compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// Polynomial decay: `p = 1 + 0.30/(1+x^1.2)`, `q = 1 + 0.40/(1+x²)`.
    Case1,
    /// Exponential decay: `p = 1 + 0.2e^(−x)`, `q = 1 + 0.3e^(−x)`.
    Case2,
    /// Geometric Brownian motion, `p = q = 1`.
    Case3,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::Case1, CaseId::Case2, CaseId::Case3];

    pub fn label(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
        }
    }

    pub fn parse(label: &str) -> Option<CaseId> {
        match label.to_ascii_lowercase().as_str() {
            "case1" | "1" => Some(CaseId::Case1),
            "case2" | "2" => Some(CaseId::Case2),
            "case3" | "3" => Some(CaseId::Case3),
            _ => None,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Drift and diffusion exponents `(p, q)` for a built-in case, each with a
/// certificate that passes [`verify_class_s`].
pub fn builtin_case(id: CaseId) -> (ExponentFunction, ExponentFunction) {
    let cert = |h_plus, m0, c0, alpha, m_inf| ClassSCertificate {
        h_minus: 1.0,
        h_plus,
        delta: 1.0,
        m0,
        c0,
        alpha,
        m_inf,
        r_inf: 1.0,
    };
    match id {
        // |p'| <= 0.36 x^-2.2 in the tail; (p-1)log x peaks near 0.07.
        CaseId::Case1 => (
            ExponentFunction::rational_decay(0.30, 1.2)
                .with_certificate(cert(1.30, 0.5, 0.5, 1.2, 0.1)),
            ExponentFunction::rational_decay(0.40, 2.0)
                .with_certificate(cert(1.40, 0.5, 1.0, 2.0, 0.1)),
        ),
        CaseId::Case2 => (
            ExponentFunction::exponential_decay(0.2)
                .with_certificate(cert(1.2, 0.25, 1.0, 0.5, 0.1)),
            ExponentFunction::exponential_decay(0.3)
                .with_certificate(cert(1.3, 0.35, 1.0, 0.5, 0.1)),
        ),
        // h - 1 ≡ 0, so h2 holds with M∞ = 0.
        CaseId::Case3 => (
            ExponentFunction::constant(1.0).with_certificate(cert(1.0, 1.0, 1.0, 1.0, 0.0)),
            ExponentFunction::constant(1.0).with_certificate(cert(1.0, 1.0, 1.0, 1.0, 0.0)),
        ),
    }
}

/// Log-spaced sampling grid for the hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            x_min: 1e-8,
            x_max: 1e8,
            n_points: 10_000,
        }
    }
}

impl SamplingPlan {
    /// Sample abscissae: the log grid plus `δ` and `R∞` themselves, sorted.
    pub fn points(&self, certificate: Option<&ClassSCertificate>) -> Vec<f64> {
        let mut xs = log_space(self.x_min, self.x_max, self.n_points);
        if let Some(c) = certificate {
            for extra in [c.delta, c.r_inf] {
                if extra > self.x_min && extra < self.x_max {
                    xs.push(extra);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(
        lo > 0.0 && hi > lo && n >= 2,
        "invalid log_space({lo}, {hi}, {n})"
    );
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + step * i as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H1 => "h1",
            Hypothesis::H2 => "h2",
            Hypothesis::H3 => "h3",
        })
    }
}

/// One clause of one hypothesis. `margin` is `bound − observed` at the worst
/// sample, so negative margins are violations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseCheck {
    pub hypothesis: Hypothesis,
    pub clause: &'static str,
    pub passed: bool,
    pub worst_x: Option<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub function: String,
    pub checks: Vec<ClauseCheck>,
    /// `h(x_max) − 1`: how close the largest sample is to the h2 limit.
    pub tail_deviation: f64,
    pub samples: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Hypotheses with at least one failing clause, in h1, h2, h3 order.
    pub fn failed_hypotheses(&self) -> Vec<Hypothesis> {
        let mut out: Vec<Hypothesis> = Vec::new();
        for c in self.checks.iter().filter(|c| !c.passed) {
            if !out.contains(&c.hypothesis) {
                out.push(c.hypothesis);
            }
        }
        out.sort_by_key(|h| *h as u8);
        out
    }
}

struct Worst {
    x: Option<f64>,
    margin: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            x: None,
            margin: f64::INFINITY,
        }
    }

    fn observe(&mut self, x: f64, margin: f64) {
        if margin < self.margin {
            self.margin = margin;
            self.x = Some(x);
        }
    }

    fn finish(self, hypothesis: Hypothesis, clause: &'static str) -> ClauseCheck {
        ClauseCheck {
            hypothesis,
            clause,
            passed: self.margin >= 0.0,
            worst_x: self.x,
            margin: self.margin,
        }
    }
}

/// Check the certificate of `h` against h1–h3 on the sampling grid.
pub fn verify_class_s(h: &ExponentFunction, plan: &SamplingPlan) -> Result<VerificationReport> {
    let cert = *h.require_certificate()?;
    cert.validate(h.name())?;
    let xs = plan.points(Some(&cert));

    let mut lower = Worst::new();
    let mut upper = Worst::new();
    let mut tail_log = Worst::new();
    let mut near_zero = Worst::new();
    let mut tail_deriv = Worst::new();

    for &x in &xs {
        let value = h.eval(x);
        if !value.is_finite() {
            return Err(Error::InvalidFunction {
                name: h.name().to_string(),
                x,
                value,
            });
        }
        let slope = h.deriv(x);
        if !slope.is_finite() {
            return Err(Error::InvalidFunction {
                name: format!("{}'", h.name()),
                x,
                value: slope,
            });
        }
        lower.observe(x, value - cert.h_minus);
        upper.observe(x, cert.h_plus - value);
        if x > cert.r_inf {
            tail_log.observe(x, cert.m_inf - (value - 1.0) * x.ln());
        }
        if x <= cert.delta {
            near_zero.observe(x, cert.m0 - slope.abs());
        } else {
            // Relative margin, so tiny tail values still register.
            let bound = cert.c0 * x.powf(-1.0 - cert.alpha);
            observe_ratio(&mut tail_deriv, x, bound, slope.abs());
        }
    }

    let side = 1.0 + cert.alpha - cert.h_plus;
    let checks = vec![
        lower.finish(Hypothesis::H1, "h(x) >= h_minus >= 1"),
        upper.finish(Hypothesis::H1, "h(x) <= h_plus < inf"),
        tail_log.finish(Hypothesis::H2, "(h(x) - 1) log x <= M_inf for x > R_inf"),
        ClauseCheck {
            hypothesis: Hypothesis::H3,
            clause: "h_plus < 1 + alpha",
            passed: side > 0.0,
            worst_x: None,
            margin: side,
        },
        near_zero.finish(Hypothesis::H3, "|h'(x)| <= M0 on (0, delta]"),
        tail_deriv.finish(
            Hypothesis::H3,
            "|h'(x)| <= C0 x^(-1-alpha) on (delta, x_max]",
        ),
    ];

    Ok(VerificationReport {
        function: h.name().to_string(),
        checks,
        tail_deviation: h.eval(plan.x_max) - 1.0,
        samples: xs.len(),
    })
}

fn observe_ratio(worst: &mut Worst, x: f64, bound: f64, observed: f64) {
    let margin = if bound > 0.0 {
        1.0 - observed / bound
    } else if observed == 0.0 {
        0.0
    } else {
        -f64::INFINITY
    };
    worst.observe(x, margin);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn remark_function() -> ExponentFunction {
        ExponentFunction::exponential_decay(0.5).with_certificate(ClassSCertificate {
            h_minus: 1.0,
            h_plus: 1.5,
            delta: 1.0,
            m0: 0.6,
            c0: 2.0,
            alpha: 0.6,
            m_inf: 0.1,
            r_inf: 1.0,
        })
    }

    #[test]
    fn remark_function_passes() {
        let report = verify_class_s(&remark_function(), &SamplingPlan::default()).unwrap();
        assert!(report.passed(), "{report:#?}");
    }

    #[test]
    fn small_alpha_fails_h3_side_condition() {
        let mut cert = *remark_function().certificate().unwrap();
        cert.alpha = 0.1;
        let h = ExponentFunction::exponential_decay(0.5).with_certificate(cert);
        let report = verify_class_s(&h, &SamplingPlan::default()).unwrap();
        assert!(!report.passed());
        assert_eq!(report.failed_hypotheses(), vec![Hypothesis::H3]);
        let side = report
            .checks
            .iter()
            .find(|c| c.clause == "h_plus < 1 + alpha")
            .unwrap();
        assert!(!side.passed);
    }

    #[test]
    fn constant_one_passes() {
        let h = ExponentFunction::constant(1.0).with_certificate(ClassSCertificate {
            h_minus: 1.0,
            h_plus: 1.0,
            delta: 1.0,
            m0: 1.0,
            c0: 1.0,
            alpha: 1.0,
            m_inf: 0.0,
            r_inf: 1.0,
        });
        assert!(verify_class_s(&h, &SamplingPlan::default())
            .unwrap()
            .passed());
    }

    #[test]
    fn rational_example_passes_and_tail_bound_holds_on_dense_grid() {
        let h = ExponentFunction::from_expr("1 + 0.4/(1 + x^2)")
            .unwrap()
            .with_certificate(ClassSCertificate {
                h_minus: 1.0,
                h_plus: 1.4,
                delta: 1.0,
                m0: 0.5,
                c0: 1.0,
                alpha: 2.0,
                m_inf: 0.1,
                r_inf: 1.0,
            });
        assert!(verify_class_s(&h, &SamplingPlan::default())
            .unwrap()
            .passed());
        // Hand-differentiated oracle: |h'| = 0.8x/(1+x²)² <= x^-3 for x > 1.
        for x in log_space(1.0 + 1e-9, 1e6, 50_000) {
            let d = 0.8 * x / ((1.0 + x * x) * (1.0 + x * x));
            assert!(d <= x.powi(-3), "x = {x}");
            assert!((h.deriv(x).abs() - d).abs() <= 1e-12 * d.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn constant_two_fails_h2() {
        let h = ExponentFunction::constant(2.0).with_certificate(ClassSCertificate {
            h_minus: 2.0,
            h_plus: 2.0,
            delta: 1.0,
            m0: 1.0,
            c0: 1.0,
            alpha: 1.5,
            m_inf: 1.0,
            r_inf: 1.0,
        });
        let report = verify_class_s(&h, &SamplingPlan::default()).unwrap();
        assert_eq!(report.failed_hypotheses(), vec![Hypothesis::H2]);
        assert_eq!(report.tail_deviation, 1.0);
    }

    #[test]
    fn missing_certificate_and_bad_function_are_errors() {
        let err =
            verify_class_s(&ExponentFunction::constant(1.0), &SamplingPlan::default()).unwrap_err();
        assert!(matches!(err, Error::CertificateRequired { .. }));

        let cert = *builtin_case(CaseId::Case3).0.certificate().unwrap();
        let h = ExponentFunction::from_expr("1 + 1/(x - 1)")
            .unwrap()
            .with_certificate(cert);
        let plan = SamplingPlan {
            x_min: 0.5,
            x_max: 2.0,
            n_points: 3,
        };
        // x = 1 is one of the three samples.
        let err = verify_class_s(&h, &plan).unwrap_err();
        assert!(matches!(err, Error::InvalidFunction { .. }), "{err}");
    }

    #[test]
    fn builtin_cases_pass_and_respect_bounds() {
        let bounds = [(1.30, 1.40), (1.2, 1.3), (1.0, 1.0)];
        for (id, (p_plus, q_plus)) in CaseId::ALL.into_iter().zip(bounds) {
            let (p, q) = builtin_case(id);
            for x in log_space(1e-6, 1e6, 2_000) {
                let (pv, qv) = (p.eval(x), q.eval(x));
                assert!((1.0..=p_plus).contains(&pv), "{id} p({x}) = {pv}");
                assert!((1.0..=q_plus).contains(&qv), "{id} q({x}) = {qv}");
            }
            for h in [&p, &q] {
                let report = verify_class_s(h, &SamplingPlan::default()).unwrap();
                assert!(report.passed(), "{id}: {report:#?}");
            }
        }
    }

    #[test]
    fn builtin_values() {
        let (p3, _) = builtin_case(CaseId::Case3);
        assert_eq!(p3.eval(7.3), 1.0);
        let (_, q1) = builtin_case(CaseId::Case1);
        assert!((q1.eval(1e6) - 1.0).abs() <= 1e-11);
        let (_, q2) = builtin_case(CaseId::Case2);
        assert!((q2.eval(1e-12) - 1.3).abs() <= 1e-12);
    }

    #[test]
    fn derivatives_consistent_with_values() {
        let mut fns: Vec<ExponentFunction> = Vec::new();
        for id in CaseId::ALL {
            let (p, q) = builtin_case(id);
            fns.push(p);
            fns.push(q);
        }
        fns.push(ExponentFunction::from_expr("1 + 0.5*exp(-x)").unwrap());
        for h in &fns {
            for x in log_space(1e-4, 1e4, 400) {
                let eps = 1e-5 * x;
                let fd = (h.eval(x + eps) - h.eval(x - eps)) / (2.0 * eps);
                let d = h.deriv(x);
                assert!(
                    (d - fd).abs() <= 1e-6 * (1.0 + d.abs()),
                    "{} at {x}: {d} vs {fd}",
                    h.name()
                );
            }
        }
    }
}
