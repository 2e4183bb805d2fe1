use std::fmt;

use thiserror::Error;

use crate::expr::ParseError;

/// Solver pipeline stage, used to annotate errors bubbling out of a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Coefficients,
    Pde,
    MonteCarlo,
    Oracle,
    Checks,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Coefficients => "coefficients",
            Stage::Pde => "pde",
            Stage::MonteCarlo => "monte-carlo",
            Stage::Oracle => "oracle",
            Stage::Checks => "checks",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("DOMAIN_ERROR: state must be strictly positive, got x = {x}")]
    Domain { x: f64 },

    #[error("INVALID_FUNCTION: non-finite value {value} of `{name}` at x = {x}")]
    InvalidFunction { name: String, x: f64, value: f64 },

    #[error("CERTIFICATE_REQUIRED: exponent `{name}` carries no class-S certificate")]
    CertificateRequired { name: String },

    #[error("invalid certificate for `{name}`: {reason}")]
    InvalidCertificate { name: String, reason: String },

    #[error("CONFIG_ERROR: {0}")]
    Config(String),

    #[error("NUMERIC_ERROR: non-finite {what} on path {path} (state {state})")]
    Numeric {
        path: usize,
        what: &'static str,
        state: f64,
    },

    #[error("COEFFICIENT_ERROR: non-finite {which} = {value} at node {node}")]
    Coefficient {
        node: usize,
        which: &'static str,
        value: f64,
    },

    #[error("tridiagonal system is not diagonally dominant at node {node}")]
    DiagonalDominance { node: usize },

    #[error("SOLVER_SINGULAR: zero pivot at node {node}")]
    SolverSingular { node: usize },

    #[error("non-finite Feller functional {value} at probe x = {x}")]
    FellerNonFinite { x: f64, value: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: Stage) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, with any stage annotation removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
