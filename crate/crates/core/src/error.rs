use thiserror::Error;

/// Errors produced by model construction and the analytic operations.
///
/// Variants split into two families: structural errors (malformed spaces,
/// distributions, channels, or mismatched dimensions — the kind a config
/// loader should surface as schema violations) and domain errors (valid
/// objects driven outside an operation's precondition).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariate space must have at least one label")]
    EmptySpace,

    #[error("covariate labels must be unique: {0:?} appears more than once")]
    DuplicateLabel(String),

    #[error("unknown covariate label {0:?}")]
    UnknownLabel(String),

    #[error("{context}: expected {expected} entries for this covariate space, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{context}: entry {index} is {value}, outside [0, 1]")]
    ProbabilityOutOfRange {
        context: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{context}: entries sum to {sum}, not 1 within tolerance {tolerance}")]
    NotNormalized {
        context: &'static str,
        sum: f64,
        tolerance: f64,
    },

    #[error("{context}: operands are defined over different covariate spaces")]
    SpaceMismatch { context: &'static str },

    #[error("posterior undefined: observed label {label:?} has marginal probability {marginal}")]
    UndefinedPosterior { label: String, marginal: f64 },

    #[error("{0}")]
    Domain(String),

    #[error(
        "enumeration oracle refused: {required} terms exceed the budget of {budget} \
         (raise the budget to at least {required} to run this instance)"
    )]
    OracleBudgetExceeded { required: u128, budget: u64 },

    #[error("grid search guard: {0}")]
    GridGuard(String),
}

impl Error {
    /// True for errors a file/config loader should report as schema
    /// violations rather than runtime domain errors.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Error::EmptySpace
                | Error::DuplicateLabel(_)
                | Error::UnknownLabel(_)
                | Error::DimensionMismatch { .. }
                | Error::ProbabilityOutOfRange { .. }
                | Error::NotNormalized { .. }
                | Error::SpaceMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
