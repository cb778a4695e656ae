use thiserror::Error;

/// Errors raised by the surface models, solvers and designers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    /// A circle-manifold retraction hit `x + alpha * d == 0`; the caller must shrink the step.
    #[error("degenerate retraction step at element {index}")]
    DegenerateStep { index: usize },

    #[error("displacement ({dx:.6e}, {dy:.6e}) m lies outside the steering coverage")]
    OutOfCoverage { dx: f64, dy: f64 },

    #[error("no resolution bound: every grid point is singular")]
    NoResolutionBound,

    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("instance too large for exhaustive search: {0}")]
    OracleRefused(String),
}

pub type Result<T> = std::result::Result<T, MisError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MisError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
