use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {skew:e})")]
    NotSymmetric { skew: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("nonpositive diagonal entry in row {0}")]
    NonpositiveDiagonal(usize),

    #[error("candidate vector {0} is linearly dependent in the A-inner product")]
    DependentCandidate(usize),

    #[error("degenerate weight: preconditioner denominator vanishes at ({row}, {col})")]
    DegenerateWeight { row: usize, col: usize },

    #[error("conjugate gradient breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("F-row {0} has an empty interpolation pattern but a nonzero constraint")]
    InfeasibleConstraint(usize),

    #[error("singular preconditioner: B_jj*A_ii + D_jj*C_ii = 0 at ({row}, {col})")]
    SingularPreconditioner { row: usize, col: usize },

    #[error("operator is not positive definite: curvature {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("coarsening stagnated on level {level} ({n} points, all selected as C)")]
    CoarseningStagnation { level: usize, n: usize },

    #[error("interpolation matrix is rank deficient")]
    RankDeficient,

    #[error("range of P is the whole space; two-grid constants are undefined")]
    DegenerateCoarseSpace,

    #[error("residual history too short: need at least {needed} entries, got {got}")]
    HistoryTooShort { needed: usize, got: usize },

    #[error("candidate {0} requested without a hierarchy built from the previous candidates")]
    MissingHierarchy(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Matrix Market error on line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
