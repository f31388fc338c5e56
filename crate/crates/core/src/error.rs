use thiserror::Error;

/// Errors raised by the co-simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("matrix is singular or ill-conditioned (pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenvalueIteration { iterations: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("{kind} needs {needed} input sample(s), {available} available")]
    InsufficientSamples {
        kind: String,
        needed: usize,
        available: usize,
    },

    #[error("time {t} lies outside the interval [{start}, {end}]")]
    OutsideInterval { t: f64, start: f64, end: f64 },

    #[error("input sample time {t} does not follow the last buffered time {last}")]
    NonMonotoneTime { t: f64, last: f64 },

    #[error("unit '{unit}': internal step {h} does not divide communication step {step}")]
    StepNotDivisible { unit: String, h: f64, step: f64 },

    #[error(
        "unit '{unit}': implicit step at t={time} did not converge in {iterations} iterations"
    )]
    Divergence {
        unit: String,
        time: f64,
        iterations: usize,
    },

    #[error("unit '{unit}' failed at t={time}: {source}")]
    UnitStep {
        unit: String,
        time: f64,
        source: Box<Error>,
    },

    #[error("unit '{unit}' has no snapshot to roll back to")]
    NoSnapshot { unit: String },

    #[error("unit '{unit}' does not support rollback")]
    RollbackUnsupported { unit: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown unit '{0}'")]
    UnknownUnit(String),

    #[error("invalid port '{0}'")]
    InvalidPort(String),

    #[error("units cannot be ordered: {0}")]
    NoValidOrder(String),

    #[error("co-simulation step at t={time} did not converge after {iterations} iterations")]
    NonConvergence { time: f64, iterations: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate error curve: {0}")]
    DegenerateCurve(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn mismatch(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    /// True for errors caused by malformed input rather than by running a simulation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidScenario(_)
                | Error::UnknownUnit(_)
                | Error::InvalidPort(_)
                | Error::StepNotDivisible { .. }
                | Error::NoValidOrder(_)
                | Error::Parse(_)
                | Error::DimensionMismatch { .. }
                | Error::NotSquare { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
