use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bandlimit must be at least 4, got {0}")]
    BandlimitTooSmall(usize),

    #[error("field size {got} does not match grid size {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("coefficient degree {got} exceeds the available degree {max}")]
    DegreeOutOfRange { max: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("metric is not positive definite at node {node} (eigenvalues {min_eig:.3e})")]
    NotPositiveDefinite { node: usize, min_eig: f64 },

    #[error("curvature must be positive everywhere (min K = {0:.3e})")]
    NonPositiveCurvature(f64),

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:.3e})")]
    NewtonDivergence { iters: usize, residual: f64 },

    #[error("point is not normalized: |u(q)| = {value:.3e}, |du(q)| = {grad:.3e}")]
    NotNormalized { value: f64, grad: f64 },

    #[error("first eigenspace not resolved: {0}")]
    ClusterNotSeparated(String),

    #[error("Gram matrix is ill conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("degenerate embedding: cross covariance has rank < 3 (singular values {0:?})")]
    DegenerateEmbedding([f64; 3]),

    #[error("metric distance {delta:.3e} is not below the threshold {delta0:.3e}")]
    DistanceTooLarge { delta: f64, delta0: f64 },

    #[error("exponents violate the estimate constraints: {0}")]
    ExponentConstraint(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
