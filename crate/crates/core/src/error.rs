use thiserror::Error;

/// Errors surfaced by scenario generation, statistics, optimization and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("user drop failed after {attempts} attempts (cell {cell}); geometry is infeasible")]
    DropRetryExceeded { cell: usize, attempts: usize },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("non-finite SINR for user ({l}, {k})")]
    NonFiniteSinr { l: usize, k: usize },

    #[error("subproblem solver did not converge after {newton_steps} Newton steps (gap {gap:.3e}, decrement {decrement:.3e})")]
    SolverNonConvergence {
        newton_steps: usize,
        gap: f64,
        decrement: f64,
    },

    #[error("SCA iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("K = {k}, setup {setup}: {source}")]
    Setup {
        k: usize,
        setup: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed results file: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
