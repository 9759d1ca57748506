use crate::oracle::Strategy;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// A single validation finding, reported with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An integrand or objective produced NaN/inf at the given abscissa.
    #[error("integration failure: non-finite evaluation at t = {abscissa}")]
    NonFiniteEvaluation { abscissa: f64 },

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    /// Bisection sampled a value incompatible with the declared monotonicity.
    #[error("contract violation: non-monotone sample at t = {at} (value {value})")]
    NonMonotoneSample { at: f64, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Specification rejected by `validate`; carries every violation found.
    #[error("invalid specification: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("time {t} outside the trading interval [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    /// A challenger strategy beat the candidate by more than the tolerance.
    #[error("optimality violation: challenger improves the objective by {gap:e}")]
    OptimalityViolation { gap: f64, challenger: Box<Strategy> },
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
