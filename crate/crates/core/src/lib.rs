//! Crank–Nicolson and Feynman–Kac Monte Carlo solvers for a degenerate
//! parabolic Cauchy problem with variable exponents, with executable checks
//! of the structural hypotheses on the exponents.

pub mod error;
pub mod exponent;
pub mod expr;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod pde;
pub mod sde;
pub mod tridiag;
pub mod validation;

pub use error::{Error, Result, Stage};
pub use exponent::{
    builtin_case, verify_class_s, CaseId, ClassSCertificate, ExponentFunction, SamplingPlan,
};
pub use mc::{estimate_u, McConfig, McEstimate};
pub use model::{ModelSpec, ScalarFn};
pub use pde::{solve_pde, LogGrid, SolveOptions};
pub use validation::{run_case, ComparisonReport, RunSettings};
