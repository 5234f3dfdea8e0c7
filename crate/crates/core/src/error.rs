use thiserror::Error;

pub type Result<T> = std::result::Result<T, PpiError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpiError {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in `{field}` at index {index}")]
    NonFinite { field: &'static str, index: usize },

    #[error("`{field}` needs at least {required} observations, found {found}")]
    TooFewObservations {
        field: &'static str,
        required: usize,
        found: usize,
    },

    #[error("loss `{0}` reads features but the dataset has no unlabeled features")]
    MissingFeatures(String),

    #[error("invalid label {value} at index {index} for loss `{loss}`")]
    InvalidLabel {
        loss: String,
        index: usize,
        value: f64,
    },

    #[error("loss evaluation produced a non-finite value")]
    NonFiniteLoss,

    #[error("lambda {lambda} lies outside the convexity range [{lo}, {hi}]")]
    LambdaOutsideConvexity { lambda: f64, lo: f64, hi: f64 },

    #[error("matrix `{name}` is singular (condition number {condition:e})")]
    SingularMatrix { name: &'static str, condition: f64 },

    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl PpiError {
    /// True for failures caused by ill-conditioned linear algebra rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PpiError::SingularMatrix { .. } | PpiError::NotPositiveDefinite(_) | PpiError::NonFiniteLoss
        )
    }
}
