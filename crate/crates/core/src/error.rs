use thiserror::Error;

pub type Result<T> = std::result::Result<T, MppError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MppError {
    /// Invalid model or configuration parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The projected data has (numerically) zero variance, or an inner
    /// second-moment matrix is singular.
    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),

    /// A set of vectors expected to be linearly independent is not.
    #[error("rank deficiency: {0}")]
    Rank(String),

    /// The mixing proportion sits on the boundary where kurtosis carries no
    /// separation information.
    #[error("degenerate mixing regime: {0}")]
    Regime(String),

    /// Third-moment signs are undefined for equal group sizes.
    #[error("balanced groups (alpha1 = 1/2): signs are undefined, align pairs by correlation instead")]
    BalancedGroups,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
