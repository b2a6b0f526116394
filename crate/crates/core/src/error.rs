use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by the exit-code class the CLI maps them to:
/// configuration/precondition, capacity, and numerical.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("dense-matrix budget exceeded: {qubits} qubits requested, limit is {limit}")]
    Capacity { qubits: usize, limit: usize },

    #[error("degenerate ground state at lambda = {lambda}: gap {gap:.3e} below tolerance {tolerance:.3e}")]
    Degenerate { lambda: f64, gap: f64, tolerance: f64 },

    #[error("grid too coarse: {0}")]
    Refinement(String),

    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),

    #[error("step too large: dt * H_max = {0:.3} exceeds 0.5")]
    StepUnderflow(f64),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for this error: 2 precondition/config, 3 capacity,
    /// 4 numerical (degeneracy, non-convergence).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 3,
            Error::Degenerate { .. } | Error::Refinement(_) | Error::NonConvergence(_) | Error::StepUnderflow(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
