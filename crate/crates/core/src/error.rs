use thiserror::Error;

pub type Result<T, E = SaddleError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SaddleError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The inner proximal minimization hit its iteration cap.
    #[error("inner minimization did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    /// Virtual copies have not caught up with the original variables.
    #[error("state not converged: |x - z| = {x_gap:e}, |y - w| = {y_gap:e} (tolerance {tol:e})")]
    NotConverged { x_gap: f64, y_gap: f64, tol: f64 },

    #[error("flow did not converge: {detail}")]
    FlowNotConverged { detail: String, final_state: Vec<f64> },

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("invalid initial state: {0}")]
    InvalidInit(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("problem too large for enumeration: {candidates} candidate bases exceed cap {cap}")]
    UnsupportedScale { candidates: u128, cap: u128 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SaddleError::DimensionMismatch { what, expected, found })
    }
}
