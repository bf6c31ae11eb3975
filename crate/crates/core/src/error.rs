use crate::separated::SeparatedSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A random variable that should scale a deterministic system is (close
    /// to) zero, so the projected operator is singular.
    #[error("degenerate random variable: {0}")]
    DegenerateLambda(String),

    #[error("near-singular realization at sample {sample}: {detail}")]
    SingularRealization { sample: usize, detail: String },

    #[error("inconsistent algebraic equation at sample {sample}")]
    InconsistentSample { sample: usize },

    #[error("matrix is not positive definite: pivot {pivot} at row {row} (max diagonal {max_diagonal:e})")]
    NotPositiveDefinite { row: usize, pivot: f64, max_diagonal: f64 },

    #[error("stability bound violated at step {step}: {detail}")]
    Stability { step: usize, detail: String },

    #[error("solution is identically zero")]
    DegenerateSolution,

    #[error("enrichment did not converge after {} couples", .partial.len())]
    NonConvergence { partial: Box<SeparatedSolution> },

    #[error("Monte Carlo oracle failed on {failures} of {total} samples")]
    Oracle { failures: usize, total: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
