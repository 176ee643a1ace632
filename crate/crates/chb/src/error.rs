//! Error types shared across the solver stack.

use thiserror::Error;

/// Labels for the model hypotheses checked by the assumption validator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
            Hypothesis::H6 => "H6",
            Hypothesis::H7 => "H7",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum ChbError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("assumption {hypothesis} violated: {detail}")]
    AssumptionViolation {
        hypothesis: Hypothesis,
        detail: String,
    },

    #[error("linear solver diverged: {0}")]
    SolverDiverged(String),

    #[error("phase field blow-up: max|phi| = {max_abs:.3e} exceeds {limit:.3e}")]
    BlowUp { max_abs: f64, limit: f64 },

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),

    #[error("control bounds inverted: {0}")]
    BoundsInverted(String),

    #[error("line search stalled after {0} halvings; gradient may be inconsistent")]
    LineSearchStalled(usize),

    #[error("config error at `{key}`: {reason}")]
    ConfigError { key: String, reason: String },

    #[error("snapshot format error: {0}")]
    FormatError(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ChbError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ChbError::ConfigError {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 2 = validation failure, 3 = solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ChbError::SolverDiverged(_)
            | ChbError::BlowUp { .. }
            | ChbError::LineSearchStalled(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, ChbError>;
