//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by constellation construction, noise modeling,
/// detection, bound evaluation, and the design algorithms.
#[derive(Debug, Error)]
pub enum Error {
    /// A circularity coefficient was requested for a zero-variance law.
    #[error("circularity coefficient undefined for zero variance")]
    ZeroVariance,

    /// A distortion profile violates its parameter ranges or would compose
    /// to a pseudo-variance larger in magnitude than the variance.
    #[error("infeasible distortion profile: {0}")]
    InfeasibleProfile(String),

    /// I/Q statistics are degenerate: `|rho_z|` has reached 1 or a component
    /// variance has collapsed, so detector metrics and bounds would divide
    /// by zero.
    #[error("singular noise statistics: {0}")]
    SingularStatistics(String),

    /// A constellation request or instance violates its invariants.
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    /// Priors are invalid for the requested operation (outside the simplex,
    /// zero on the support, fewer than two supported symbols, ...).
    #[error("invalid priors: {0}")]
    InvalidPriors(String),

    /// Shaping parameters are outside their admissible box.
    #[error("invalid shaping parameters: {0}")]
    InvalidShaping(String),

    /// A pairwise error probability was requested for a degenerate pair.
    #[error("degenerate symbol pair: {0}")]
    DegeneratePair(String),

    /// A design problem is structurally infeasible.
    #[error("infeasible design problem: {0}")]
    InfeasibleProblem(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// A link or experiment configuration is invalid. `field` names the
    /// offending parameter.
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed spec: {0}")]
    SpecParse(String),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
