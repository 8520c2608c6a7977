use thiserror::Error;

#[derive(Debug, Error)]
pub enum GsvdError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported Matrix Market header: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("the pencil is singular: null spaces of A and B intersect nontrivially")]
    SingularPencil,

    #[error("expected a unit vector, got norm {0}")]
    NotUnit(f64),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("B^T B is numerically singular on the search space; use the gd variant")]
    IllConditionedBtB,

    #[error("triplet is not converged (backward error {0:.3e})")]
    NotConverged(f64),

    #[error("locked block is degenerate")]
    DegenerateLock,

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("basis is rank deficient")]
    RankDeficient,

    #[error("invalid permutation")]
    InvalidPermutation,

    #[error("vector has zero M-norm")]
    MDegenerate,

    #[error("A restricted to the null space of B is rank deficient")]
    NullspaceDegenerate,

    #[error("rate requires kappa >= 1, got {0}")]
    InvalidKappa(f64),
}

pub type Result<T> = std::result::Result<T, GsvdError>;
