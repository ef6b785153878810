//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a numeric precondition (negative radius, bad quantile, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky factorization failed because the matrix is not positive definite.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A matrix that must be symmetric is not.
    #[error("matrix is not symmetric")]
    NotSymmetric,

    /// A covariance matrix is too degenerate to use, even after repair.
    #[error("covariance matrix is singular or degenerate")]
    SingularCovariance,

    /// The evaluation budget is spent; optimizers terminate and report best-so-far.
    #[error("evaluation budget exhausted")]
    BudgetExhausted,

    /// A point lies outside the invertible image of a trust-region map.
    #[error("point lies outside the trust-region image")]
    OutsideTrustRegion,

    /// Invalid configuration (unsupported dimension, unknown name, bad hyperparameter).
    #[error("configuration error: {0}")]
    Config(String),

    /// Surrogate training produced a non-finite loss; parameters were rolled back.
    #[error("training aborted: {0}")]
    Training(String),
}

pub type Result<T> = std::result::Result<T, Error>;
